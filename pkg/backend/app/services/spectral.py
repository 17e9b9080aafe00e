"""
Spectral zeta functions zeta_L(s) = sum_k lambda_k**-s.

Power-law spectra lambda_k = k**alpha are evaluated as classical p-series of
exponent alpha*s, so alpha = 1 runs through exactly the classical code path.
Explicit spectra are finite: their "reference" is the full-array sum.
"""
import math
from typing import Iterable, List, Optional

from pydantic import ValidationError

from app.core.exceptions import DivergentConfigurationError, SpectrumFormatError, TableRangeError, ValidationFailure
from app.core.logging import get_logger
from app.schemas.spectral import ExplicitSpectrum, PowerLawSpectrum, SpectralPair, SpectrumSource
from app.services.deficiency import EstimationContext, binomial_terms
from app.services.series_core import AnchoredSum, SeriesTable, anchored_reference, build_table, table_from_terms

logger = get_logger(__name__)


def _check_order(s: float) -> float:
    if not (math.isfinite(s) and s > 0):
        raise ValidationFailure(f"spectral exponent must be finite and > 0 (got {s!r})")
    return float(s)


def spectral_table(source: SpectrumSource, s: float, n_max: int) -> SeriesTable:
    """Compensated prefix table of sum_{k<=n} lambda_k**-s for n in [1, n_max]."""
    s = _check_order(s)
    if isinstance(source, PowerLawSpectrum):
        exponent = source.alpha * s
        if exponent > 1:
            return build_table(exponent, n_max)
        return table_from_terms(exponent, [k ** -exponent for k in range(1, n_max + 1)])

    if n_max > source.k_max:
        raise TableRangeError(f"n={n_max} beyond available spectrum (k_max={source.k_max})")
    return table_from_terms(s, [lam ** -s for lam in source.eigenvalues[:n_max]])


def spectral_partial_sum(source: SpectrumSource, s: float, n: int) -> float:
    """S_n = sum_{k=1}^{n} lambda_k**-s, ascending k, compensated."""
    return spectral_table(source, s, n).value(n)


def spectral_deficiency(pair: SpectralPair, n: int) -> float:
    """D_n = (S_n^(p))^(q/p) - sum_{k<=n} lambda_k**-q."""
    base = spectral_partial_sum(pair.source, pair.p, n)
    target = spectral_partial_sum(pair.source, pair.q, n)
    return math.exp(pair.alpha_ratio * math.log(base)) - target


def spectral_reference(
    source: SpectrumSource,
    s: float,
    n_max: int,
    n_ref: Optional[int] = None,
    m_ref: Optional[int] = None,
) -> AnchoredSum:
    """
    zeta_L(s) pinned to a prefix table covering [1, n_max].

    Power laws use the oracle zeta_L(s) = zeta(alpha*s); explicit spectra use
    the full-array sum (anchor k_max, no tail).
    """
    s = _check_order(s)
    if isinstance(source, PowerLawSpectrum):
        exponent = source.alpha * s
        if exponent <= 1:
            raise DivergentConfigurationError(
                f"divergent configuration: alpha*s = {exponent} <= 1 for alpha={source.alpha}, s={s}"
            )
        return anchored_reference(exponent, n_max, n_ref=n_ref, m_ref=m_ref)

    table = spectral_table(source, s, source.k_max)
    return AnchoredSum(table=table, anchor=source.k_max, tail=0.0)


def spectral_context(
    pair: SpectralPair,
    n_max: int,
    n_ref: Optional[int] = None,
    m_ref: Optional[int] = None,
) -> EstimationContext:
    """Estimation context for a spectral pair; classical for power laws, finite for explicit spectra."""
    source = pair.source
    if isinstance(source, PowerLawSpectrum):
        alpha = source.alpha
        return EstimationContext(
            q=alpha * pair.q,
            p=alpha * pair.p,
            target=spectral_reference(source, pair.q, n_max, n_ref=n_ref, m_ref=m_ref),
            base=spectral_reference(source, pair.p, n_max, n_ref=n_ref, m_ref=m_ref),
        )

    if n_max > source.k_max:
        raise TableRangeError(f"n={n_max} beyond available spectrum (k_max={source.k_max})")
    logger.debug("explicit_spectrum_context", k_max=source.k_max, p=pair.p, q=pair.q)
    return EstimationContext(
        q=pair.q,
        p=pair.p,
        target=spectral_reference(source, pair.q, n_max),
        base=spectral_reference(source, pair.p, n_max),
        classical=False,
    )


def spectral_estimator(pair: SpectralPair, n: int, zeta_L_p_reference: float) -> float:
    """
    Bias-corrected spectral estimate of zeta_L(q):

        zeta_L(p)^(q/p) - D_n - (q/p) zeta_L(p)^(q/p - 1) (zeta_L(p) - S_n)
    """
    if zeta_L_p_reference is None or not math.isfinite(zeta_L_p_reference) or zeta_L_p_reference <= 0:
        raise ValidationFailure(f"spectral reference zeta_L(p) must be finite and > 0 (got {zeta_L_p_reference!r})")

    ratio = pair.alpha_ratio
    base = spectral_partial_sum(pair.source, pair.p, n)
    target = spectral_partial_sum(pair.source, pair.q, n)
    head = math.exp(ratio * math.log(zeta_L_p_reference))
    deficiency = math.exp(ratio * math.log(base)) - target
    u = (zeta_L_p_reference - base) / zeta_L_p_reference
    return head - deficiency + head * binomial_terms(ratio, u, 1)


def spectral_threshold(alpha: float, q: float) -> float:
    """p* = (alpha*q + 1) / (2*alpha)."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValidationFailure(f"alpha must be finite and > 0 (got {alpha!r})")
    if not math.isfinite(q) or alpha * q <= 1:
        raise DivergentConfigurationError(f"divergent configuration: requires alpha*q > 1 (got alpha={alpha}, q={q})")
    return (alpha * q + 1) / (2 * alpha)


def parse_spectrum_lines(lines: Iterable[str]) -> ExplicitSpectrum:
    """
    Parse an eigenvalue listing: one positive decimal per line, nondecreasing.

    Blank lines and lines starting with '#' are ignored. Errors carry the
    1-based line number of the offending entry.
    """
    eigenvalues: List[float] = []
    for line_number, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        try:
            value = float(text)
        except ValueError:
            raise SpectrumFormatError(f"not a decimal number: {text!r}", line=line_number) from None
        if not math.isfinite(value) or value <= 0:
            raise SpectrumFormatError(f"eigenvalue must be finite and > 0 (got {text})", line=line_number)
        if eigenvalues and value < eigenvalues[-1]:
            index = len(eigenvalues) + 1
            raise SpectrumFormatError(f"eigenvalues must be nondecreasing; index {index} decreases", line=line_number)
        eigenvalues.append(value)

    if not eigenvalues:
        raise SpectrumFormatError("spectrum contains no eigenvalues")
    try:
        return ExplicitSpectrum(eigenvalues=tuple(eigenvalues))
    except ValidationError as e:
        raise SpectrumFormatError(str(e)) from e
