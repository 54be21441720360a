"""
Probability-vector algebra: validation, Ky Fan norms, majorization, classical distances
and steepest epsilon-approximations.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import settings
from app.core.exceptions import IndexOutOfRangeError, ValidationError

logger = logging.getLogger(__name__)

Policy = Literal["strict", "renormalize"]

_BLOCK = 1024


class NeumaierSum:
    """Running compensated sum."""

    __slots__ = ("_sum", "_comp")

    def __init__(self, start: float = 0.0):
        self._sum = float(start)
        self._comp = 0.0

    def add(self, value: float) -> None:
        value = float(value)
        total = self._sum + value
        if abs(self._sum) >= abs(value):
            self._comp += (self._sum - total) + value
        else:
            self._comp += (value - total) + self._sum
        self._sum = total

    @property
    def value(self) -> float:
        return self._sum + self._comp


def compensated_cumsum(values: np.ndarray, offset: float = 0.0,
                       threshold: Optional[int] = None) -> np.ndarray:
    """Prefix sums of `values` (plus `offset`), compensated across 1024-entry blocks when long."""
    values = np.asarray(values, dtype=np.float64)
    threshold = settings.compensated_threshold if threshold is None else threshold
    n = values.size
    if n <= threshold:
        out = np.cumsum(values)
        if offset:
            out += offset
        return out

    n_blocks = -(-n // _BLOCK)
    padded = np.zeros(n_blocks * _BLOCK)
    padded[:n] = values
    local = np.cumsum(padded.reshape(n_blocks, _BLOCK), axis=1)

    # exact block totals keep in-block rounding from accumulating across blocks
    offsets = np.empty(n_blocks)
    acc = NeumaierSum(offset)
    for i, block in enumerate(padded.reshape(n_blocks, _BLOCK)):
        offsets[i] = acc.value
        acc.add(math.fsum(block))
    return (local + offsets[:, None]).ravel()[:n]


class ProbVec:
    """Immutable non-increasing probability vector (Schmidt coefficients)."""

    __slots__ = ("_entries", "_cumulative", "_rank")

    def __init__(self, entries: Union[np.ndarray, Sequence[float]]):
        arr = np.array(entries, dtype=np.float64, copy=True).ravel()
        if arr.size == 0:
            raise ValidationError("probability vector must have at least one entry")
        if np.any(arr < 0) or np.any(np.diff(arr) > 0):
            raise ValidationError("ProbVec entries must be non-negative and non-increasing; use make_prob_vec")
        arr.setflags(write=False)
        cumulative = compensated_cumsum(arr)
        cumulative.setflags(write=False)
        self._entries = arr
        self._cumulative = cumulative
        self._rank = int(np.count_nonzero(arr > 0))
        if self._rank == 0:
            raise ValidationError("probability vector has no positive entry")

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def cumulative(self) -> np.ndarray:
        """Ky Fan norms for k = 1..dim."""
        return self._cumulative

    @property
    def dim(self) -> int:
        return int(self._entries.size)

    @property
    def rank(self) -> int:
        return self._rank

    @property
    def p1(self) -> float:
        return float(self._entries[0])

    def prefixed_cumulative(self, dim: Optional[int] = None) -> np.ndarray:
        """Ky Fan norms for k = 0..dim, padded with the total mass beyond self.dim."""
        dim = self.dim if dim is None else dim
        out = np.empty(dim + 1)
        out[0] = 0.0
        upto = min(dim, self.dim)
        out[1:upto + 1] = self._cumulative[:upto]
        if dim > self.dim:
            out[self.dim + 1:] = self._cumulative[-1]
        return out

    def padded(self, dim: int) -> np.ndarray:
        if dim < self.dim:
            raise ValidationError(f"cannot pad a dim-{self.dim} vector down to {dim}")
        if dim == self.dim:
            return self._entries
        return np.concatenate([self._entries, np.zeros(dim - self.dim)])

    def to_list(self) -> list:
        return self._entries.tolist()

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProbVec):
            return NotImplemented
        return bool(np.array_equal(self._entries, other._entries))

    __hash__ = None

    def __repr__(self) -> str:
        head = ", ".join(f"{x:.6g}" for x in self._entries[:6])
        more = ", ..." if self.dim > 6 else ""
        return f"ProbVec([{head}{more}], dim={self.dim}, rank={self.rank})"


def make_prob_vec(raw: Iterable[float], policy: Policy = "strict",
                  tolerance: Optional[float] = None) -> ProbVec:
    """Validate, clamp, normalize and sort raw entries into a ProbVec."""
    tol = settings.normalization_tolerance if tolerance is None else tolerance
    try:
        arr = np.asarray(list(raw) if not isinstance(raw, np.ndarray) else raw, dtype=np.float64).ravel()
    except (TypeError, ValueError) as e:
        raise ValidationError(f"entries must be real numbers: {str(e)}")

    if arr.size == 0:
        raise ValidationError("probability vector must have at least one entry")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise ValidationError(f"entry {int(bad[0])} is not finite ({arr[bad[0]]!r})")
    negative = np.flatnonzero(arr < -tol)
    if negative.size:
        i = int(negative[0])
        raise ValidationError(f"entry {i} is negative ({arr[i]!r})")

    arr = np.where(arr < 0, 0.0, arr)
    total = math.fsum(arr.tolist())
    if total <= 0:
        raise ValidationError("entries sum to zero")
    if policy == "strict":
        if abs(total - 1.0) > tol:
            raise ValidationError(f"entries sum to {total!r}, expected 1 within {tol!r}")
    elif policy != "renormalize":
        raise ValidationError(f"unknown normalization policy '{policy}'")

    arr = arr / total
    return ProbVec(-np.sort(-arr, kind="stable"))


def uniform(n: int) -> ProbVec:
    if n < 1:
        raise ValidationError(f"dimension must be positive, got {n}")
    return ProbVec(np.full(n, 1.0 / n))


def e1(n: int = 1) -> ProbVec:
    if n < 1:
        raise ValidationError(f"dimension must be positive, got {n}")
    arr = np.zeros(n)
    arr[0] = 1.0
    return ProbVec(arr)


def pad_pair(p: ProbVec, q: ProbVec) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-pad two vectors to their common dimension."""
    dim = max(p.dim, q.dim)
    return p.padded(dim), q.padded(dim)


def ky_fan(p: ProbVec, k: int) -> float:
    """Sum of the k largest entries."""
    if k < 0 or k > p.dim:
        raise IndexOutOfRangeError(f"Ky Fan index {k} outside [0, {p.dim}]")
    if k == 0:
        return 0.0
    return float(p.cumulative[k - 1])


def entanglement_monotone_E(p: ProbVec, k: int) -> float:
    if k < 1 or k > p.dim:
        raise IndexOutOfRangeError(f"monotone index {k} outside [1, {p.dim}]")
    return 1.0 - ky_fan(p, k)


def majorizes(r: ProbVec, p: ProbVec, tolerance: Optional[float] = None) -> bool:
    """True when r majorizes p (every cumulative sum of r dominates that of p)."""
    tol = settings.normalization_tolerance if tolerance is None else tolerance
    dim = max(r.dim, p.dim)
    cr = r.prefixed_cumulative(dim)[1:]
    cp = p.prefixed_cumulative(dim)[1:]
    return bool(np.all(cr >= cp - tol))


def trace_distance(p: ProbVec, q: ProbVec) -> float:
    a, b = pad_pair(p, q)
    return min(1.0, 0.5 * float(np.abs(a - b).sum()))


def fidelity(p: ProbVec, q: ProbVec) -> float:
    a, b = pad_pair(p, q)
    return min(1.0, float(np.sqrt(a * b).sum()))


def purified_distance(p: ProbVec, q: ProbVec) -> float:
    a, b = pad_pair(p, q)
    # 1 - F computed as half the squared Hellinger sum keeps precision near F = 1
    one_minus_f = min(1.0, 0.5 * float(np.square(np.sqrt(a) - np.sqrt(b)).sum()))
    return math.sqrt(max(0.0, one_minus_f * (2.0 - one_minus_f)))


@dataclass(frozen=True)
class EpsBallQuery:
    center: ProbVec
    radius: float

    def __post_init__(self):
        if not isinstance(self.center, ProbVec):
            raise ValidationError("ball center must be a ProbVec")
        if not math.isfinite(self.radius) or not 0.0 <= self.radius <= 1.0:
            raise ValidationError(f"radius must lie in [0, 1], got {self.radius!r}")


def steepest_approximation(query: EpsBallQuery) -> ProbVec:
    """Majorization-maximal element of the trace-distance ball around the center."""
    q = query.center
    eps = float(query.radius)
    if eps == 0.0:
        return q
    if 1.0 - q.p1 <= eps:
        return e1(q.dim)

    target = 1.0 - eps
    cumulative = q.cumulative
    # k_eps: number of leading cumulative sums not exceeding 1 - eps
    k = int(np.searchsorted(cumulative, target, side="right"))
    if k >= q.dim:
        return q

    out = np.zeros(q.dim)
    out[0] = q.p1 + eps
    out[1:k] = q.entries[1:k]
    out[k] = max(0.0, target - float(cumulative[k - 1]))
    return make_prob_vec(out, policy="renormalize")
