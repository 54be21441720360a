"""
Finite-n embezzlement: tensor constructions, the closed embezzlement distance,
the criterion max_l ||p||_(2l-1) - ||p||_(l-1) and scans over n.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config.settings import settings
from app.core.exceptions import DomainError, EmbezzleMeterError, InternalError, ValidationError
from app.core.majorization import NeumaierSum, ProbVec, compensated_cumsum
from app.models.family import FamilySpec
from app.models.reports import EmbezzleEvaluation
from app.services.family_service import family_member, finite_n_bound

logger = logging.getLogger(__name__)


def _check_factor(m: int, minimum: int) -> int:
    if int(m) != m or m < minimum:
        raise ValidationError(f"m must be an integer >= {minimum}, got {m!r}")
    return int(m)


def tensor_with_uniform(p: ProbVec, m: int) -> ProbVec:
    """Schmidt vector of psi (x) Phi_m: each p_x split into m copies of p_x / m."""
    m = _check_factor(m, 1)
    if m == 1:
        return p
    return ProbVec(np.repeat(p.entries / m, m))


def tensor_with_e1(p: ProbVec, m: int) -> ProbVec:
    m = _check_factor(m, 1)
    if m == 1:
        return p
    return ProbVec(p.padded(p.dim * m))


def thm2_criterion(p: ProbVec) -> Tuple[float, int]:
    """max over l <= ceil(rank/2) of ||p||_(2l-1) - ||p||_(l-1), with the smallest maximizing l."""
    cumulative = p.prefixed_cumulative()
    ls = np.arange(1, -(-p.rank // 2) + 1)
    values = cumulative[2 * ls - 1] - cumulative[ls - 1]
    i = int(np.argmax(values))
    return min(1.0, float(values[i])), i + 1


def embezzle_distance(p: ProbVec, m: int) -> EmbezzleEvaluation:
    """Star distance from p (x) e1 to p (x) Phi_m via the a_k = floor(k/m), b_k = k - a_k m formula."""
    m = _check_factor(m, 2)
    cumulative = p.prefixed_cumulative()
    ks = np.arange(1, p.rank + 1)
    a = ks // m
    b = ks - a * m
    values = cumulative[ks] - cumulative[a] - (b / m) * p.entries[a]
    i = int(np.argmax(values))
    criterion, argmax_l = thm2_criterion(p)
    return EmbezzleEvaluation(
        n=p.dim,
        m=m,
        d_star_value=min(1.0, max(0.0, float(values[i]))),
        criterion_value=criterion,
        p1=p.p1,
        argmax_k=i + 1,
        argmax_l=argmax_l,
        streamed=False,
    )


class PrefixCursor:
    """Forward-only prefix sums S(i) of a monotone family's sorted weights, held in a sliding window."""

    def __init__(self, spec: FamilySpec, n: int):
        self._spec = spec
        self._n = n
        self._start = 0
        self._window = np.zeros(1)
        self._acc = NeumaierSum()

    @property
    def end(self) -> int:
        return self._start + self._window.size - 1

    def prefix(self, indices: np.ndarray) -> np.ndarray:
        """S at non-decreasing indices in [0, n]; requests never move below an earlier request's minimum."""
        lo, hi = int(indices[0]), int(indices[-1])
        if lo < self._start:
            raise InternalError(f"prefix cursor moved backwards ({lo} < {self._start})")
        if hi > self._n:
            raise InternalError(f"prefix index {hi} beyond n = {self._n}")
        if hi > self.end:
            weights = self._spec.sorted_weights(self._n, self.end, hi)
            extension = compensated_cumsum(weights, offset=self._acc.value)
            self._acc.add(math.fsum(weights.tolist()))
            self._window = np.concatenate([self._window, extension])
        if lo > self._start:
            self._window = self._window[lo - self._start:]
            self._start = lo
        return self._window[indices - self._start]


def evaluate_streaming(spec: FamilySpec, n: int, m: int, chunk: Optional[int] = None) -> EmbezzleEvaluation:
    """Embezzlement distance and criterion of the size-n member without materializing it."""
    m = _check_factor(m, 2)
    chunk = settings.stream_chunk if chunk is None else int(chunk)
    lead = PrefixCursor(spec, n)
    trail_m = PrefixCursor(spec, n)
    trail_2 = PrefixCursor(spec, n)

    best_d, best_k = -math.inf, 0
    best_c, best_l = -math.inf, 0
    for k0 in range(1, n + 1, chunk):
        ks = np.arange(k0, min(k0 + chunk, n + 1))
        s_k = lead.prefix(ks)

        a = ks // m
        b = ks - a * m
        s_a = trail_m.prefix(a)
        next_weights = spec.sorted_weights(n, int(a[0]), int(a[-1]) + 1)[a - a[0]]
        values = s_k - s_a - (b / m) * next_weights
        i = int(np.argmax(values))
        if values[i] > best_d:
            best_d, best_k = float(values[i]), int(ks[i])

        odd = (ks % 2) == 1
        if np.any(odd):
            ks_odd = ks[odd]
            crit = s_k[odd] - trail_2.prefix((ks_odd - 1) // 2)
            j = int(np.argmax(crit))
            if crit[j] > best_c:
                best_c, best_l = float(crit[j]), int((ks_odd[j] + 1) // 2)

    total = float(lead.prefix(np.array([n]))[0])
    first = float(spec.sorted_weights(n, 0, 1)[0])
    return EmbezzleEvaluation(
        n=n,
        m=m,
        d_star_value=min(1.0, max(0.0, best_d / total)),
        criterion_value=min(1.0, best_c / total),
        p1=first / total,
        argmax_k=best_k,
        argmax_l=best_l,
        streamed=True,
    )


def evaluate_member(spec: FamilySpec, n: int, m: int) -> EmbezzleEvaluation:
    """Streaming evaluation for monotone families, materialize-and-sort otherwise."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    if n > spec.domain_max:
        raise DomainError(f"n = {int(n)} exceeds the domain of {spec.label} (x <= {spec.domain_max!r})")
    if spec.monotonicity is not None:
        return evaluate_streaming(spec, int(n), m)
    return embezzle_distance(family_member(spec, int(n)), m)


def parse_schedule(text: str, integer: bool = True) -> List[float]:
    """'geometric:start,factor,count' or 'list:v1,v2,...' into a strictly increasing schedule."""
    kind, _, body = (text or "").partition(":")
    try:
        parts = [float(v) for v in body.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"invalid schedule '{text}'")
    if kind == "geometric":
        if len(parts) != 3 or parts[2] != int(parts[2]) or parts[2] < 1:
            raise ValidationError(f"geometric schedule needs start,factor,count; got '{body}'")
        start, factor, count = parts
        values = [start * factor ** j for j in range(int(count))]
    elif kind == "list":
        values = parts
    else:
        raise ValidationError(f"unknown schedule kind '{kind}' (expected geometric or list)")

    if integer:
        values = [int(round(v)) for v in values]
    return validate_schedule(values)


def validate_schedule(values: Sequence[float]) -> List[float]:
    values = list(values)
    if not values:
        raise ValidationError("schedule is empty")
    if values[0] < 1:
        raise ValidationError(f"schedule values must be >= 1, got {values[0]!r}")
    for prev, cur in zip(values, values[1:]):
        if not cur > prev:
            raise ValidationError(f"schedule must be strictly increasing ({prev!r} then {cur!r})")
    return values


class EmbezzlementService:
    """Parallel scans of a family over a schedule of n."""

    def __init__(self, threads: Optional[int] = None):
        self.threads = threads

    def _evaluate_entry(self, spec: FamilySpec, n: int, m: int) -> EmbezzleEvaluation:
        try:
            evaluation = evaluate_member(spec, n, m)
            return evaluation.model_copy(update={"bound": finite_n_bound(spec, n, m)})
        except EmbezzleMeterError as e:
            logger.warning(f"⚠️ {spec.label} at n={n}: {str(e)}")
            return EmbezzleEvaluation(n=n, m=m, error=str(e))
        except MemoryError:
            logger.warning(f"⚠️ {spec.label} at n={n}: out of memory")
            return EmbezzleEvaluation(n=n, m=m, error="out of memory")

    def embezzle_scan(self, family: FamilySpec, m: int, schedule: Sequence[int],
                      threads: Optional[int] = None) -> List[EmbezzleEvaluation]:
        """One evaluation per n, ordered by n regardless of completion order."""
        m = _check_factor(m, 2)
        schedule = [int(n) for n in validate_schedule(schedule)]
        workers = threads or self.threads or settings.worker_count
        logger.info(f"🔄 Scanning {family.label} with m={m} over {len(schedule)} sizes ({workers} threads)")

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = pool.map(lambda n: self._evaluate_entry(family, n, m), schedule)
            evaluations = list(tqdm(results, total=len(schedule), disable=not settings.progress,
                                    desc=f"embezzle {family.label}"))

        failures = sum(1 for e in evaluations if e.error)
        logger.info(f"✅ Scan of {family.label} completed ({failures} failed entries)")
        return evaluations


embezzlement_service = EmbezzlementService()
