"""
Classical series quantities for the deficiency toolkit.

Partial sums of k**-s are accumulated with Neumaier compensation and stored as
double-double prefix tables (prefix + compensation), so differences of partial
sums and tails against a reference anchor keep full relative accuracy.

Also provides exact Bernoulli numbers, Euler's closed form for zeta(2m) and the
Euler-Maclaurin evaluator used as the reference oracle.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core import config
from app.core.exceptions import CapacityError, TableRangeError, ValidationFailure
from app.core.logging import get_logger
from app.schemas.exponents import as_exponent

logger = get_logger(__name__)


@dataclass(frozen=True)
class SeriesTable:
    """
    Compensated prefix sums of a positive series.

    prefix[n] is the binary64 value of the n-th partial sum (prefix[0] = 0) and
    prefix[n] + compensation[n] carries it to roughly twice working precision.
    """

    exponent: float
    prefix: np.ndarray
    compensation: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.prefix) - 1

    def check_index(self, n: int) -> None:
        if not 1 <= n <= self.n_max:
            raise TableRangeError(f"n={n} outside table range [1, {self.n_max}] (exponent {self.exponent})")

    def value(self, n: int) -> float:
        self.check_index(n)
        return float(self.prefix[n])

    def difference(self, anchor: int, n: int) -> float:
        """S_anchor - S_n using both words of the prefix."""
        self.check_index(anchor)
        self.check_index(n)
        high = float(self.prefix[anchor]) - float(self.prefix[n])
        low = float(self.compensation[anchor]) - float(self.compensation[n])
        return high + low


@dataclass(frozen=True)
class AnchoredSum:
    """
    Limit of a series pinned to a prefix table: value = S_anchor + tail.

    `tail` is the analytic remainder beyond the anchor (Euler-Maclaurin for
    p-series, zero for finite spectra).
    """

    table: SeriesTable
    anchor: int
    tail: float

    @property
    def value(self) -> float:
        a = self.anchor
        return float(self.table.prefix[a]) + (float(self.table.compensation[a]) + self.tail)

    def residual(self, n: int) -> float:
        """value - S_n without cancellation against the leading digits."""
        return self.table.difference(self.anchor, n) + self.tail


@dataclass(frozen=True)
class BernoulliCache:
    """Exact Bernoulli numbers B_0..B_max_index (B_1 = -1/2)."""

    values: Tuple[Fraction, ...]

    @property
    def max_index(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, index: int) -> Fraction:
        if not 0 <= index <= self.max_index:
            raise TableRangeError(f"Bernoulli index {index} outside [0, {self.max_index}]")
        return self.values[index]

    def as_float(self, index: int) -> float:
        return float(self[index])


def _compensated_prefix(terms: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    # Neumaier running sum; each stored prefix is the fast-two-sum split of s + c.
    prefix: List[float] = [0.0]
    compensation: List[float] = [0.0]
    s = 0.0
    c = 0.0
    for x in terms:
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        hi = s + c
        prefix.append(hi)
        compensation.append(c - (hi - s))

    prefix_arr = np.array(prefix, dtype=np.float64)
    compensation_arr = np.array(compensation, dtype=np.float64)
    prefix_arr.setflags(write=False)
    compensation_arr.setflags(write=False)
    return prefix_arr, compensation_arr


def _check_positive_int(value: int, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ValidationFailure(f"{name} must be a positive integer (got {value!r})")
    return int(value)


def _check_table_cap(n_max: int, cap: Optional[int]) -> None:
    limit = config.settings.TABLE_N_MAX_CAP if cap is None else cap
    if n_max > limit:
        raise CapacityError(f"table length n_max={n_max} exceeds the configured cap {limit}")


def table_from_terms(exponent: float, terms: Sequence[float], cap: Optional[int] = None) -> SeriesTable:
    """Build a compensated prefix table from precomputed positive terms."""
    if not len(terms):
        raise ValidationFailure("cannot build a table from an empty term list")
    _check_table_cap(len(terms), cap)
    prefix, compensation = _compensated_prefix(terms)
    return SeriesTable(exponent=exponent, prefix=prefix, compensation=compensation)


@lru_cache(maxsize=64)
def _power_table(exponent: float, n_max: int) -> SeriesTable:
    # Scalar libm pow per term keeps prefix entries independent of n_max.
    terms = [k ** -exponent for k in range(1, n_max + 1)]
    prefix, compensation = _compensated_prefix(terms)
    logger.debug("table_built", exponent=exponent, n_max=n_max)
    return SeriesTable(exponent=exponent, prefix=prefix, compensation=compensation)


def build_table(exponent: float, n_max: int, cap: Optional[int] = None) -> SeriesTable:
    """
    Prefix table of S_n = sum_{k<=n} k**-exponent for n in [1, n_max].
    """
    exponent = as_exponent(exponent)
    n_max = _check_positive_int(n_max, "n_max")
    _check_table_cap(n_max, cap)
    return _power_table(exponent, n_max)


def partial_sum(exponent: float, n: int) -> float:
    """S_n = sum_{k=1}^{n} k**-exponent, ascending k, compensated."""
    n = _check_positive_int(n, "n")
    return build_table(exponent, n).value(n)


def tail_leading(exponent: float, n: int) -> float:
    """Leading tail term 1 / ((s - 1) n**(s - 1))."""
    exponent = as_exponent(exponent)
    n = _check_positive_int(n, "n")
    return 1.0 / ((exponent - 1.0) * n ** (exponent - 1.0))


@lru_cache(maxsize=8)
def _bernoulli_fractions(max_index: int) -> Tuple[Fraction, ...]:
    values: List[Fraction] = [Fraction(1)]
    for m in range(1, max_index + 1):
        # sum_{j=0}^{m} C(m+1, j) B_j = 0
        s = sum((math.comb(m + 1, j) * values[j] for j in range(m)), Fraction(0))
        values.append(-s / (m + 1))
    return tuple(values)


def bernoulli(max_index: int, cap: Optional[int] = None) -> BernoulliCache:
    """Exact Bernoulli numbers up to an even index via the defining recurrence."""
    limit = config.settings.BERNOULLI_MAX_INDEX if cap is None else cap
    max_index = _check_positive_int(max_index, "max_index")
    if max_index % 2:
        raise ValidationFailure(f"max_index must be even (got {max_index})")
    if max_index > limit:
        raise CapacityError(f"Bernoulli index {max_index} exceeds the configured cap {limit}")
    return BernoulliCache(values=_bernoulli_fractions(max_index))


def even_zeta_closed_form(m: int, cap: Optional[int] = None) -> float:
    """zeta(2m) = (-1)**(m+1) B_2m (2 pi)**(2m) / (2 (2m)!)."""
    m = _check_positive_int(m, "m")
    b = bernoulli(2 * m, cap=cap)[2 * m]
    coefficient = (-1) ** (m + 1) * b / (2 * math.factorial(2 * m))
    return float(coefficient) * (2.0 * math.pi) ** (2 * m)


def euler_maclaurin_tail(q: float, n: int, correction_order: int, cap: Optional[int] = None) -> float:
    """
    Euler-Maclaurin estimate of sum_{k>n} k**-q:

        n**(1-q)/(q-1) - n**-q/2 + sum_{m=1}^{M} B_2m/(2m)! (q)_(2m-1) n**(-q-2m+1)

    where (q)_j is the rising factorial.
    """
    q = as_exponent(q, "q")
    n = _check_positive_int(n, "n")
    if correction_order < 0:
        raise ValidationFailure(f"correction order must be >= 0 (got {correction_order})")

    corrections = 0.0
    if correction_order:
        numbers = bernoulli(2 * correction_order, cap=cap)
        rising = q
        for m in range(1, correction_order + 1):
            if m > 1:
                rising *= (q + 2 * m - 3) * (q + 2 * m - 2)
            coefficient = float(numbers[2 * m] / math.factorial(2 * m))
            corrections += coefficient * rising * n ** (-q - 2 * m + 1)

    return (n ** (1.0 - q) / (q - 1.0) - 0.5 * n ** -q) + corrections


def euler_maclaurin_zeta(
    q: float,
    n: int,
    correction_order: int,
    table: Optional[SeriesTable] = None,
    cap: Optional[int] = None,
) -> float:
    """
    M-correction Euler-Maclaurin approximation of zeta(q) from the first n terms.

    An existing table for exponent q may be passed to avoid rebuilding prefixes.
    """
    q = as_exponent(q, "q")
    n = _check_positive_int(n, "n")
    if n < 2:
        raise ValidationFailure(f"Euler-Maclaurin evaluation requires n >= 2 (got {n})")
    if table is None:
        table = build_table(q, n)
    elif table.exponent != q:
        raise ValidationFailure(f"table exponent {table.exponent} does not match q={q}")

    tail = euler_maclaurin_tail(q, n, correction_order, cap=cap)
    return AnchoredSum(table=table, anchor=n, tail=tail).value


def anchored_reference(
    q: float,
    n_max: int,
    n_ref: Optional[int] = None,
    m_ref: Optional[int] = None,
) -> AnchoredSum:
    """
    Reference zeta(q) pinned to a table covering [1, max(n_max, N_ref)].

    Its value equals reference_zeta(q) bit for bit.
    """
    n_ref = config.settings.REFERENCE_N if n_ref is None else n_ref
    m_ref = config.settings.REFERENCE_M if m_ref is None else m_ref
    n_ref = max(_check_positive_int(n_ref, "N_ref"), 2)
    table = build_table(q, max(n_max, n_ref))
    return AnchoredSum(table=table, anchor=n_ref, tail=euler_maclaurin_tail(q, n_ref, m_ref))


def reference_zeta(q: float, n_ref: Optional[int] = None, m_ref: Optional[int] = None) -> float:
    """
    Ground-truth zeta(q): euler_maclaurin_zeta(q, N_ref, M_ref).

    Defaults N_ref = 10**4, M_ref = 6 target <= 1e-15 relative for q in (1, 40].
    """
    n_ref = config.settings.REFERENCE_N if n_ref is None else n_ref
    m_ref = config.settings.REFERENCE_M if m_ref is None else m_ref
    return _reference_cached(as_exponent(q, "q"), max(n_ref, 2), m_ref)


@lru_cache(maxsize=128)
def _reference_cached(q: float, n_ref: int, m_ref: int) -> float:
    value = euler_maclaurin_zeta(q, n_ref, m_ref)
    logger.debug("reference_computed", q=q, n_ref=n_ref, m_ref=m_ref, value=value)
    return value
