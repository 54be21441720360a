"""
Brute-force oracles over the majorization polytope {r sorted, sum r = 1, r majorizes p}.

Used to cross-check the closed-form star distance and the purified optimizer.
"""

import logging
import math
from typing import Literal, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from config.settings import settings
from app.core.exceptions import InternalError, UnsupportedOperationError, ValidationError
from app.core.majorization import ProbVec

logger = logging.getLogger(__name__)

OracleMethod = Literal["grid", "lp"]

_FEASIBILITY_SLACK = 1e-12
_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def polytope_constraints(p: ProbVec, dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Inequality/equality rows (A_ub r <= b_ub, A_eq r = b_eq) describing {r sorted, r majorizes p}."""
    cp = p.prefixed_cumulative(dim)[1:]
    rows = []
    rhs = []
    for x in range(dim - 1):
        # r[x+1] - r[x] <= 0
        row = np.zeros(dim)
        row[x], row[x + 1] = -1.0, 1.0
        rows.append(row)
        rhs.append(0.0)
    for k in range(1, dim):
        # -(r_1 + ... + r_k) <= -P_k
        row = np.zeros(dim)
        row[:k] = -1.0
        rows.append(row)
        rhs.append(-float(cp[k - 1]))
    a_ub = np.array(rows).reshape(-1, dim)
    b_ub = np.array(rhs)
    return a_ub, b_ub, np.ones((1, dim)), np.array([1.0])


def sorted_lattice(dim: int, resolution: int) -> np.ndarray:
    """All non-increasing compositions of `resolution` into `dim` non-negative parts."""
    if dim > 3:
        raise UnsupportedOperationError("grid oracle supports dim ≤ 3")
    n = int(resolution)
    if n < 1:
        raise ValidationError(f"grid resolution must be positive, got {resolution}")
    if dim == 1:
        return np.array([[n]])
    if dim == 2:
        first = np.arange(-(-n // 2), n + 1)
        return np.stack([first, n - first], axis=1)

    blocks = []
    for i1 in range(-(-n // 3), n + 1):
        rest = n - i1
        i2 = np.arange(-(-rest // 2), min(i1, rest) + 1)
        if i2.size == 0:
            continue
        blocks.append(np.stack([np.full(i2.size, i1), i2, rest - i2], axis=1))
    return np.concatenate(blocks)


def _feasible(points: np.ndarray, cp: np.ndarray) -> np.ndarray:
    return np.all(np.cumsum(points, axis=1) >= cp - _FEASIBILITY_SLACK, axis=1)


def oracle_min_l1_over_majorizing(p: ProbVec, q: ProbVec, method: OracleMethod = "grid",
                                  resolution: Optional[int] = None) -> float:
    """Minimum of half the L1 distance to q over r majorizing p."""
    dim = max(p.dim, q.dim)
    qq = q.padded(dim)

    if method == "grid":
        if dim > 3:
            raise UnsupportedOperationError("grid oracle supports dim ≤ 3")
        resolution = settings.grid_resolution(dim) if resolution is None else resolution
        points = sorted_lattice(dim, resolution) / float(resolution)
        cp = p.prefixed_cumulative(dim)[1:]
        points = points[_feasible(points, cp)]
        if points.size == 0:
            raise InternalError("grid oracle found no feasible point")
        return float(0.5 * np.abs(points - qq).sum(axis=1).min())

    if method == "lp":
        return _lp_min_l1(p, qq, dim)

    raise ValidationError(f"unknown oracle method '{method}'")


def _lp_min_l1(p: ProbVec, qq: np.ndarray, dim: int) -> float:
    # variables: r (dim) then u (dim) with u >= |r - q|
    a_poly, b_poly, a_eq, b_eq = polytope_constraints(p, dim)
    eye = np.eye(dim)
    a_ub = np.vstack([
        np.hstack([eye, -eye]),
        np.hstack([-eye, -eye]),
        np.hstack([a_poly, np.zeros((a_poly.shape[0], dim))]),
    ])
    b_ub = np.concatenate([qq, -qq, b_poly])
    c = np.concatenate([np.zeros(dim), np.full(dim, 0.5)])

    result = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=np.hstack([a_eq, np.zeros((1, dim))]),
        b_eq=b_eq,
        bounds=[(0.0, 1.0)] * dim + [(0.0, None)] * dim,
        method="highs-ds",
        options=_HIGHS_OPTIONS,
    )
    if result.status != 0:
        logger.error(f"LP oracle failed: {result.message}")
        raise InternalError(f"LP oracle failed: {result.message}")
    r = result.x[:dim]
    return float(0.5 * np.abs(r - qq).sum())


def oracle_max_fidelity_over_majorizing(p: ProbVec, q: ProbVec, resolution: Optional[int] = None,
                                        refine_levels: Optional[int] = None) -> float:
    """Maximum of sum sqrt(r_x q_x) over grid points r majorizing p, with local zoom refinement."""
    dim = max(p.dim, q.dim)
    if dim > 3:
        raise UnsupportedOperationError("grid oracle supports dim ≤ 3")
    resolution = settings.fidelity_grid_resolution if resolution is None else resolution
    refine_levels = settings.fidelity_refine_levels if refine_levels is None else refine_levels

    sqrt_q = np.sqrt(q.padded(dim))
    cp = p.prefixed_cumulative(dim)[1:]

    points = sorted_lattice(dim, resolution) / float(resolution)
    points = points[_feasible(points, cp)]
    values = np.sqrt(points) @ sqrt_q
    best = int(np.argmax(values))
    best_point, best_value = points[best], float(values[best])

    step = 1.0 / resolution
    offsets_1d = np.arange(-10, 11)
    for _ in range(refine_levels):
        if dim == 1:
            break
        step /= 10.0
        if dim == 2:
            heads = best_point[0] + offsets_1d[:, None] * step
        else:
            g1, g2 = np.meshgrid(offsets_1d, offsets_1d, indexing="ij")
            heads = best_point[:2] + np.stack([g1.ravel(), g2.ravel()], axis=1) * step
        tail = 1.0 - heads.sum(axis=1, keepdims=True)
        candidates = np.hstack([heads, tail])
        ok = (
            np.all(candidates >= 0.0, axis=1)
            & np.all(np.diff(candidates, axis=1) <= 0.0, axis=1)
            & _feasible(candidates, cp)
        )
        candidates = candidates[ok]
        if candidates.size == 0:
            continue
        local = np.sqrt(candidates) @ sqrt_q
        i = int(np.argmax(local))
        if local[i] > best_value:
            best_point, best_value = candidates[i], float(local[i])

    return min(1.0, best_value)


def grid_error_bound(dim: int, resolution: int) -> float:
    return dim / float(resolution)


def fidelity_to_purified(value: float) -> float:
    return math.sqrt(max(0.0, 1.0 - value * value))
