"""
Exact LOCC convertibility tests and the star conversion distance.
"""

import logging
import math
from typing import Iterable, Optional, Tuple

import numpy as np

from config.settings import settings
from app.core.exceptions import EmbezzleMeterError, ValidationError
from app.core.majorization import Policy, ProbVec, majorizes, make_prob_vec
from app.core.oracles import oracle_min_l1_over_majorizing
from app.models.reports import ConversionReport, EnsembleCheckResult, EnsembleSchema

logger = logging.getLogger(__name__)

DISCRIMINATION_INPUTS = ("d_star", "sandwich_lo", "sandwich_hi")


class Ensemble:
    """Weighted list of Schmidt vectors {t_z, phi_z}."""

    __slots__ = ("_members",)

    def __init__(self, members: Iterable[Tuple[float, ProbVec]], tolerance: Optional[float] = None):
        tol = settings.normalization_tolerance if tolerance is None else tolerance
        members = tuple((float(w), state) for w, state in members)
        if not members:
            raise ValidationError("ensemble must have at least one member")
        for i, (weight, state) in enumerate(members):
            if not isinstance(state, ProbVec):
                raise ValidationError(f"member {i} state is not a ProbVec")
            if not math.isfinite(weight) or weight < -tol or weight > 1.0 + tol:
                raise ValidationError(f"member {i} weight {weight!r} outside [0, 1]")
        total = math.fsum(w for w, _ in members)
        if abs(total - 1.0) > tol:
            raise ValidationError(f"ensemble weights sum to {total!r}, expected 1 within {tol!r}")
        self._members = tuple((min(max(w, 0.0), 1.0), s) for w, s in members)

    @classmethod
    def from_schema(cls, schema: EnsembleSchema, policy: Policy = "strict") -> "Ensemble":
        members = []
        for i, member in enumerate(schema.members):
            try:
                members.append((member.weight, make_prob_vec(member.state, policy=policy)))
            except ValidationError as e:
                raise ValidationError(f"member {i}: {str(e)}")
        return cls(members)

    @property
    def members(self) -> Tuple[Tuple[float, ProbVec], ...]:
        return self._members

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self._members])

    @property
    def dim(self) -> int:
        return max(s.dim for _, s in self._members)

    def __len__(self) -> int:
        return len(self._members)


def nielsen_convertible(psi: ProbVec, phi: ProbVec) -> bool:
    """psi -> phi by LOCC iff phi majorizes psi."""
    return majorizes(phi, psi)


def ensemble_convertible(psi: ProbVec, ens: Ensemble,
                         tolerance: Optional[float] = None) -> Tuple[bool, int, float]:
    """Probabilistic conversion psi -> {t_z, phi_z}: (feasible, worst k, min margin)."""
    tol = settings.normalization_tolerance if tolerance is None else tolerance
    dim = max(psi.dim, ens.dim)
    monotones_psi = 1.0 - psi.prefixed_cumulative(dim)[1:]
    averaged = np.zeros(dim)
    for weight, state in ens.members:
        averaged += weight * (1.0 - state.prefixed_cumulative(dim)[1:])
    margins = monotones_psi - averaged
    worst = int(np.argmin(margins))
    margin = float(margins[worst])
    return margin >= -tol, worst + 1, margin


def pure_to_mixed_check(psi: ProbVec, decomposition: Ensemble) -> bool:
    """Sufficient test for psi -> sigma given one pure-state decomposition of sigma."""
    return ensemble_convertible(psi, decomposition)[0]


def star_distance_value(psi: ProbVec, phi: ProbVec,
                        tolerance: Optional[float] = None) -> Tuple[float, int]:
    """Closed formula: max over k <= rank(psi) of ||p||_(k) - ||q||_(k), with smallest argmax."""
    tol = settings.normalization_tolerance if tolerance is None else tolerance
    dim = max(psi.dim, phi.dim)
    rank = psi.rank
    diffs = psi.prefixed_cumulative(dim)[1:rank + 1] - phi.prefixed_cumulative(dim)[1:rank + 1]
    k = int(np.argmax(diffs))
    value = float(diffs[k])
    if value <= tol:
        value = 0.0
    return min(value, 1.0), k + 1


def sandwich_bounds(d_star: float) -> Tuple[float, float]:
    """(d*^2 / 2, sqrt(2 d*)), reported without clamping."""
    _check_unit_interval(d_star, "d_star")
    return 0.5 * d_star * d_star, math.sqrt(2.0 * d_star)


def discrimination_bound(d_value: float) -> float:
    _check_unit_interval(d_value, "d_value")
    return 0.5 * (1.0 + d_value)


def _check_unit_interval(value: float, name: str) -> None:
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")


def star_distance(psi: ProbVec, phi: ProbVec, discrimination_input: str = "d_star") -> ConversionReport:
    d_star, argmax_k = star_distance_value(psi, phi)
    lo, hi = sandwich_bounds(d_star)

    if discrimination_input == "d_star":
        fed = d_star
    elif discrimination_input == "sandwich_lo":
        fed = lo
    elif discrimination_input == "sandwich_hi":
        fed = min(hi, 1.0)
    else:
        raise ValidationError(
            f"discrimination input must be one of {', '.join(DISCRIMINATION_INPUTS)}, got '{discrimination_input}'"
        )

    return ConversionReport(
        d_star=d_star,
        argmax_k=argmax_k,
        sandwich_lo=lo,
        sandwich_hi=hi,
        discrimination_bound=discrimination_bound(fed),
        discrimination_input=discrimination_input,
        dim=max(psi.dim, phi.dim),
        rank_psi=psi.rank,
    )


class ConversionService:
    """Composes conversion reports with optional purified and oracle values."""

    def report(self, psi: ProbVec, phi: ProbVec, purified: bool = False,
               method: str = "cvxpy", oracle: Optional[str] = None,
               discrimination_input: str = "d_star") -> ConversionReport:
        from app.services.purified_optimizer import star_distance_purified

        try:
            report = star_distance(psi, phi, discrimination_input=discrimination_input)
            updates = {}
            if purified:
                updates["d_star_purified"] = star_distance_purified(psi, phi, method=method)
                updates["purified_method"] = method
            if oracle is not None:
                updates["oracle"] = oracle
                updates["d_star_oracle"] = oracle_min_l1_over_majorizing(psi, phi, method=oracle)
            logger.info(f"Star distance {report.d_star!r} at k={report.argmax_k} (dim {report.dim})")
            return report.model_copy(update=updates)
        except EmbezzleMeterError:
            raise
        except Exception as e:
            logger.error(f"Failed to compute conversion report: {str(e)}")
            raise

    def check_ensemble(self, psi: ProbVec, ens: Ensemble) -> EnsembleCheckResult:
        convertible, worst_k, margin = ensemble_convertible(psi, ens)
        logger.info(f"Ensemble check over {len(ens)} members: convertible={convertible}, margin={margin!r}")
        return EnsembleCheckResult(convertible=convertible, worst_k=worst_k, margin=margin)


conversion_service = ConversionService()
