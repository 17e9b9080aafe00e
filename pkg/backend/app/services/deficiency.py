"""
Deficiency framework: D_n^(p,q) = (S_n^(p))^(q/p) - T_n^(q), the estimator
hierarchy built on zeta(q) = zeta(p)^(q/p) - D_inf, and the rate theory.

Estimators of order K subtract the first K Taylor terms of
zeta(p)^(q/p) - (S_n)^(q/p) in powers of the base tail t_n = zeta(p) - S_n:
A is K = 0, B is K = 1, B2 is K = 2.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core import config
from app.core.exceptions import TableRangeError, ValidationFailure
from app.core.logging import get_logger
from app.schemas.exponents import BaseStrategy, EstimatorKind, EstimatorTag, ExponentPair, as_exponent
from app.services.series_core import (
    AnchoredSum,
    SeriesTable,
    anchored_reference,
    euler_maclaurin_tail,
)

logger = get_logger(__name__)

# Below this base-tail ratio the binomial remainder is summed as a series.
_SERIES_THRESHOLD = 0.25
_SERIES_MAX_TERMS = 10_000


@dataclass(frozen=True)
class DeficiencySeries:
    """values[n] = D_n for n in [1, n_max]; increments[n] = D_n - D_{n-1} (n >= 2)."""

    pair: ExponentPair
    n_max: int
    values: np.ndarray
    increments: np.ndarray


@dataclass(frozen=True)
class EstimationContext:
    """
    Tables and reference anchors shared by every estimator of one (p, q) run.

    `base` is None for target-only runs (truncation, Euler-Maclaurin).
    `classical` marks p-series targets, for which Euler-Maclaurin applies.
    """

    q: float
    target: AnchoredSum
    p: Optional[float] = None
    base: Optional[AnchoredSum] = None
    classical: bool = True

    @property
    def n_max(self) -> int:
        n_max = self.target.table.n_max
        if self.base is not None:
            n_max = min(n_max, self.base.table.n_max)
        return n_max

    @property
    def ratio(self) -> float:
        if self.p is None:
            raise ValidationFailure("estimator needs a base exponent p")
        return self.q / self.p

    def require_base(self) -> AnchoredSum:
        if self.base is None:
            raise ValidationFailure("estimator needs a base exponent p")
        return self.base


def build_context(
    q: float,
    n_max: int,
    p: Optional[float] = None,
    n_ref: Optional[int] = None,
    m_ref: Optional[int] = None,
) -> EstimationContext:
    """Prefix tables for T^(q) (and S^(p)) plus their reference anchors."""
    q = as_exponent(q, "q")
    if p is not None:
        ExponentPair(p=p, q=q)
    target = anchored_reference(q, n_max, n_ref=n_ref, m_ref=m_ref)
    base = anchored_reference(p, n_max, n_ref=n_ref, m_ref=m_ref) if p is not None else None
    return EstimationContext(q=q, target=target, p=p, base=base)


def _power(x: float, exponent: float) -> float:
    return math.exp(exponent * math.log(x))


def _check_tables(pair: ExponentPair, base_table: SeriesTable, target_table: SeriesTable) -> None:
    if base_table.exponent != pair.p:
        raise ValidationFailure(f"base table exponent {base_table.exponent} does not match p={pair.p}")
    if target_table.exponent != pair.q:
        raise ValidationFailure(f"target table exponent {target_table.exponent} does not match q={pair.q}")


def deficiency_direct(pair: ExponentPair, base_table: SeriesTable, target_table: SeriesTable, n: int) -> float:
    """D_n = (S_n)^(q/p) - T_n."""
    _check_tables(pair, base_table, target_table)
    return _power(base_table.value(n), pair.alpha_ratio) - target_table.value(n)


def deficiency_incremental(pair: ExponentPair, base_table: SeriesTable, n_max: int) -> DeficiencySeries:
    """
    D_n = sum_{k=2}^{n} [(S_k)^(q/p) - (S_{k-1})^(q/p) - k**-q], accumulated
    with compensation in one sequential pass.
    """
    if base_table.exponent != pair.p:
        raise ValidationFailure(f"base table exponent {base_table.exponent} does not match p={pair.p}")
    if not 1 <= n_max <= base_table.n_max:
        raise TableRangeError(f"n_max={n_max} outside base table range [1, {base_table.n_max}]")

    ratio = pair.alpha_ratio
    q = pair.q
    prefix = base_table.prefix
    values = [0.0, 0.0]
    increments = [0.0, 0.0]
    previous = _power(float(prefix[1]), ratio)
    s = 0.0
    c = 0.0
    for k in range(2, n_max + 1):
        current = _power(float(prefix[k]), ratio)
        incr = (current - previous) - k ** -q
        previous = current
        t = s + incr
        if abs(s) >= abs(incr):
            c += (s - t) + incr
        else:
            c += (incr - t) + s
        s = t
        values.append(s + c)
        increments.append(incr)

    values_arr = np.array(values, dtype=np.float64)
    increments_arr = np.array(increments, dtype=np.float64)
    values_arr.setflags(write=False)
    increments_arr.setflags(write=False)
    return DeficiencySeries(pair=pair, n_max=n_max, values=values_arr, increments=increments_arr)


def estimates_from_series(series: DeficiencySeries, base_table: SeriesTable, zeta_p: float, order: int) -> np.ndarray:
    """
    Order-K estimates for n = 1..n_max from an incremental deficiency series,
    with t_n = zeta_p - S_n in plain binary64. Index 0 is NaN.
    """
    if order < 0:
        raise ValidationFailure(f"correction order must be >= 0 (got {order})")
    ratio = series.pair.alpha_ratio
    n_max = series.n_max
    u = (zeta_p - base_table.prefix[1 : n_max + 1]) / zeta_p
    head = _power(zeta_p, ratio)

    correction = np.zeros_like(u)
    term = np.ones_like(u)
    for j in range(1, order + 1):
        term = term * ((ratio - (j - 1)) / j) * -u
        correction += term

    estimates = np.full(n_max + 1, np.nan)
    estimates[1:] = head - series.values[1:] + head * correction
    return estimates


def binomial_terms(ratio: float, u: float, order: int) -> float:
    """sum_{j=1}^{order} C(ratio, j) (-u)**j."""
    total = 0.0
    term = 1.0
    for j in range(1, order + 1):
        term *= (ratio - (j - 1)) / j * -u
        total += term
    return total


def binomial_remainder(ratio: float, u: float, order: int) -> float:
    """
    (1 - u)**ratio - sum_{j=0}^{order} C(ratio, j) (-u)**j for 0 <= u < 1.

    Small u is summed from the series so the result keeps relative accuracy.
    """
    if u == 0.0:
        return 0.0
    if u > _SERIES_THRESHOLD:
        return math.pow(1.0 - u, ratio) - (1.0 + binomial_terms(ratio, u, order))

    term = 1.0
    for j in range(1, order + 1):
        term *= (ratio - (j - 1)) / j * -u
    total = 0.0
    for j in range(order + 1, order + 1 + _SERIES_MAX_TERMS):
        term *= (ratio - (j - 1)) / j * -u
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return total


def _target_value(context: EstimationContext, n: int) -> float:
    return context.target.table.value(n)


def _base_state(context: EstimationContext, n: int):
    base = context.require_base()
    zeta_p = base.value
    t_n = base.residual(n)
    return zeta_p, t_n, t_n / zeta_p


def evaluate(kind: EstimatorKind, context: EstimationContext, n: int) -> float:
    """Estimate of zeta(q) at n in plain binary64."""
    if kind.tag is EstimatorTag.TRUNCATION:
        return _target_value(context, n)
    if kind.tag is EstimatorTag.EULER_MACLAURIN:
        if not context.classical:
            raise ValidationFailure("Euler-Maclaurin applies to p-series targets only")
        if n < 2:
            raise ValidationFailure(f"Euler-Maclaurin evaluation requires n >= 2 (got {n})")
        return AnchoredSum(table=context.target.table, anchor=n, tail=euler_maclaurin_tail(context.q, n, kind.order)).value

    ratio = context.ratio
    zeta_p, _, u = _base_state(context, n)
    base_table = context.require_base().table
    head = _power(zeta_p, ratio)
    deficiency = _power(base_table.value(n), ratio) - _target_value(context, n)
    return head - deficiency + head * binomial_terms(ratio, u, kind.correction_order)


def _check_pair(kind: EstimatorKind, pair: ExponentPair, context: EstimationContext) -> None:
    if pair.q != context.q or (kind.uses_base and pair.p != context.p):
        raise ValidationFailure(f"context (p={context.p}, q={context.q}) does not match pair {pair}")


def estimator(kind: EstimatorKind, pair: Optional[ExponentPair], n: int, context: EstimationContext) -> float:
    """
    Estimate of zeta(q).

    Truncation returns T_n; EulerMaclaurin(M) the M-correction expansion;
    A, B, B2 and bk:K return zeta(p)^(q/p) - D_n minus the first K bias terms,
    with t_n = reference_zeta(p) - S_n taken from the compensated tables.
    """
    if pair is not None:
        _check_pair(kind, pair, context)
    return evaluate(kind, context, n)


def estimator_error(kind: EstimatorKind, context: EstimationContext, n: int) -> float:
    """
    Signed error estimate(n) - zeta(q) without forming the estimate.

    Deficiency estimators: -R_n^(q) - zeta(p)^(q/p) * rem_K(t_n / zeta(p)),
    truncation: -R_n^(q), Euler-Maclaurin: tail_M(n) - R_n^(q).
    """
    residual = context.target.residual(n)
    if kind.tag is EstimatorTag.TRUNCATION:
        return -residual
    if kind.tag is EstimatorTag.EULER_MACLAURIN:
        if not context.classical:
            raise ValidationFailure("Euler-Maclaurin applies to p-series targets only")
        if n < 2:
            raise ValidationFailure(f"Euler-Maclaurin evaluation requires n >= 2 (got {n})")
        return euler_maclaurin_tail(context.q, n, kind.order) - residual

    ratio = context.ratio
    zeta_p, _, u = _base_state(context, n)
    return -residual - _power(zeta_p, ratio) * binomial_remainder(ratio, u, kind.correction_order)


def absolute_error(kind: EstimatorKind, context: EstimationContext, n: int, mode: Optional[str] = None) -> float:
    """|estimate - zeta(q)| in `residual` (cancellation-free) or `direct` (binary64) mode."""
    mode = config.settings.ERROR_MODE if mode is None else mode
    if mode == "residual":
        return abs(estimator_error(kind, context, n))
    if mode == "direct":
        return abs(evaluate(kind, context, n) - context.target.value)
    raise ValidationFailure(f"unknown error mode {mode!r}")


def algebraic_form_a(pair: ExponentPair, n: int, context: EstimationContext) -> float:
    """A_n rearranged as T_n + [zeta(p)^(q/p) - (S_n)^(q/p)]."""
    _check_pair(EstimatorKind.deficiency_a(), pair, context)
    base = context.require_base()
    ratio = pair.alpha_ratio
    correction = _power(base.value, ratio) - _power(base.table.value(n), ratio)
    return _target_value(context, n) + correction


def predicted_rate(pair: ExponentPair) -> float:
    """min(2p - 2, q - 1)."""
    return min(2 * pair.p - 2, pair.q - 1)


def balancing_threshold(q: float) -> float:
    """p* = (q + 1) / 2; every p >= p* attains the maximal exponent q - 1."""
    q = as_exponent(q, "q")
    if q <= 2:
        raise ValidationFailure(f"balancing threshold requires q > 2 (got {q})")
    return (q + 1) / 2


def in_optimal_region(pair: ExponentPair) -> bool:
    return 2 * pair.p - 2 >= pair.q - 1


def recommended_base(q: float, strategy: BaseStrategy) -> float:
    """Universal: p = 2. ExplicitEven: p = q - 1 for odd integer q >= 3."""
    q = as_exponent(q, "q")
    strategy = BaseStrategy(strategy)
    if strategy is BaseStrategy.UNIVERSAL:
        return 2.0
    if not (q.is_integer() and q >= 3 and int(q) % 2 == 1):
        raise ValidationFailure(f"explicit-even base requires an odd integer q >= 3 (got {q})")
    return q - 1


def theoretical_rate(kind: EstimatorKind, q: float, p: Optional[float] = None) -> float:
    """
    Expected error exponent r in E_n ~ C n**-r.

    Truncation: q - 1. Euler-Maclaurin(M): q + 2M + 1.
    Deficiency order K: min((K + 1)(p - 1), q - 1); for K >= 2 this is an
    empirical expectation rather than a proven law.
    """
    if kind.tag is EstimatorTag.TRUNCATION:
        return q - 1
    if kind.tag is EstimatorTag.EULER_MACLAURIN:
        return q + 2 * kind.order + 1
    if p is None:
        raise ValidationFailure(f"rate of {kind.label} needs a base exponent p")
    return min((kind.correction_order + 1) * (p - 1), q - 1)
