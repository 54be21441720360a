"""
Purified star conversion distance: min over r majorizing p of sqrt(1 - F(r, q)^2).

The fidelity F(r, q) = sum sqrt(r_x q_x) is concave in r, so the problem is a concave
maximization over the majorization polytope {r sorted, sum r = 1, cumsum r >= cumsum p}.
Two routes are provided: a conic formulation handed to cvxpy, and Frank-Wolfe with an LP
direction oracle and exact line search.
"""

import logging
import math
from typing import Callable, Literal, Optional, Tuple

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog, minimize_scalar

from config.settings import settings
from app.core.exceptions import ConvergenceError, InternalError, ValidationError
from app.core.majorization import (
    EpsBallQuery,
    ProbVec,
    majorizes,
    steepest_approximation,
)
from app.core.oracles import polytope_constraints
from app.services.conversion_service import star_distance_value

logger = logging.getLogger(__name__)

PurifiedMethod = Literal["cvxpy", "frank-wolfe"]

_GRADIENT_FLOOR = 1e-16
_FEASIBILITY_TOL = 1e-12


def purified_from_vectors(r: np.ndarray, q: np.ndarray) -> float:
    """sqrt(1 - F^2) evaluated through the Hellinger form for accuracy near F = 1."""
    one_minus_f = min(1.0, 0.5 * float(np.square(np.sqrt(r) - np.sqrt(q)).sum()))
    return math.sqrt(max(0.0, one_minus_f * (2.0 - one_minus_f)))


def project_feasible(r: np.ndarray, cp_vec: np.ndarray) -> np.ndarray:
    """Map a near-feasible solver output onto the majorization polytope."""
    r = np.clip(np.asarray(r, dtype=np.float64), 0.0, None)
    r = -np.sort(-r)
    total = r.sum()
    if total <= 0:
        out = np.zeros_like(r)
        out[0] = 1.0
        return out
    r = r / total
    cr = np.cumsum(r)
    deficit = cp_vec[:-1] - cr[:-1]
    headroom = 1.0 - cr[:-1]
    # deficits within the majorization tolerance are rounding, not violations
    mask = (deficit > _FEASIBILITY_TOL) & (headroom > 0.0)
    if mask.any():
        # mixing with e1 raises every cumulative sum: (1 - t) C_k + t
        t = float(np.max(deficit[mask] / headroom[mask]))
        t = min(1.0, t * (1.0 + 1e-12) + 1e-15)
        r = (1.0 - t) * r
        r[0] += t
    return r


def _steepest_candidate(phi: ProbVec, d_star: float, cp_vec: np.ndarray) -> np.ndarray:
    # the steepest d*-approximation of q majorizes p and sits at trace distance d* from q
    dim = cp_vec.size
    approx = steepest_approximation(EpsBallQuery(center=phi, radius=d_star))
    return project_feasible(approx.padded(dim), cp_vec)


def _solve_cvxpy(sqrt_q: np.ndarray, cp_vec: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    dim = sqrt_q.size
    r = cp.Variable(dim, nonneg=True)
    constraints = [cp.sum(r) == 1]
    if dim > 1:
        constraints += [r[1:] <= r[:-1], cp.cumsum(r)[:-1] >= cp_vec[:-1]]
    problem = cp.Problem(cp.Maximize(sqrt_q @ cp.sqrt(r)), constraints)

    solver = settings.purified_solver
    if solver is None and "CLARABEL" in cp.installed_solvers():
        solver = "CLARABEL"
    options = {}
    if solver == "CLARABEL":
        options = {"max_iter": max_iter, "tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol}
    elif solver == "SCS":
        options = {"max_iters": max_iter, "eps_abs": tol, "eps_rel": tol}

    try:
        problem.solve(solver=solver, **options)
    except cp.error.SolverError as e:
        raise ConvergenceError(f"purified optimizer failed: {str(e)}")

    if problem.status == cp.OPTIMAL_INACCURATE:
        logger.warning("⚠️ Purified optimizer returned an inaccurate optimum")
    elif problem.status != cp.OPTIMAL:
        best = None if r.value is None else float(np.sqrt(np.clip(r.value, 0, None)) @ sqrt_q)
        raise ConvergenceError(f"purified optimizer ended with status '{problem.status}'", best_value=best)
    if r.value is None:
        raise InternalError("purified optimizer reported optimal without a solution")
    return np.asarray(r.value, dtype=np.float64)


def _lp_direction(cp_vec_source: ProbVec, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    a_ub, b_ub, a_eq, b_eq = polytope_constraints(cp_vec_source, dim)

    def solve_lp(gradient: np.ndarray) -> np.ndarray:
        result = linprog(-gradient, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                         bounds=[(0.0, 1.0)] * dim, method="highs-ds")
        if result.status != 0:
            raise InternalError(f"Frank-Wolfe direction LP failed: {result.message}")
        return result.x

    return solve_lp


def frank_wolfe(initial: np.ndarray, problem: Callable[[np.ndarray], Tuple[float, np.ndarray]],
                solve_lp: Callable[[np.ndarray], np.ndarray], maxiter: int = 5000,
                duality_gap_tol: float = 1e-6) -> Tuple[np.ndarray, float, float]:
    """Maximize a concave function; returns (x, f(x), dual upper bound)."""
    x = initial
    upper = float("inf")
    f = problem(x)[0]
    for k in range(maxiter):
        f, gradf = problem(x)
        s = solve_lp(gradf)
        upper = min(upper, f + float(gradf @ (s - x)))
        if upper - f <= duality_gap_tol:
            return x, f, upper

        direction = s - x
        search = minimize_scalar(lambda g: -problem(x + g * direction)[0],
                                 bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
        step = float(search.x) if search.success else 0.0
        if step <= 0.0:
            step = 2.0 / (k + 2.0)
        x = x + step * direction

    raise ConvergenceError(
        f"Frank-Wolfe stopped after {maxiter} iterations with duality gap {upper - f!r}",
        best_value=f,
    )


def _solve_frank_wolfe(psi: ProbVec, sqrt_q: np.ndarray, start: np.ndarray,
                       tol: float, max_iter: int) -> np.ndarray:
    dim = sqrt_q.size

    def problem(r: np.ndarray) -> Tuple[float, np.ndarray]:
        root = np.sqrt(np.clip(r, 0.0, None))
        gradient = sqrt_q / (2.0 * np.maximum(root, math.sqrt(_GRADIENT_FLOOR)))
        return float(root @ sqrt_q), gradient

    x, _, _ = frank_wolfe(start, problem, _lp_direction(psi, dim), maxiter=max_iter, duality_gap_tol=tol)
    return x


def star_distance_purified(psi: ProbVec, phi: ProbVec, tol: Optional[float] = None,
                           method: PurifiedMethod = "cvxpy", max_iter: Optional[int] = None) -> float:
    """Minimum purified distance from phi over states reachable from psi."""
    tol = settings.purified_tol if tol is None else tol
    if not tol > 0:
        raise ValidationError(f"optimizer tolerance must be positive, got {tol!r}")
    max_iter = settings.purified_max_iter if max_iter is None else max_iter
    if method not in ("cvxpy", "frank-wolfe"):
        raise ValidationError(f"unknown purified method '{method}'")

    if majorizes(phi, psi):
        return 0.0

    dim = max(psi.dim, phi.dim)
    q = phi.padded(dim)
    sqrt_q = np.sqrt(q)
    cp_vec = psi.prefixed_cumulative(dim)[1:]

    d_star, _ = star_distance_value(psi, phi)
    candidate = _steepest_candidate(phi, d_star, cp_vec)
    best = purified_from_vectors(candidate, q)
    if psi.p1 >= 1.0:
        return best

    if method == "cvxpy":
        r = _solve_cvxpy(sqrt_q, cp_vec, tol, max_iter)
    else:
        r = _solve_frank_wolfe(psi, sqrt_q, candidate, tol, min(max_iter, 5000))

    value = purified_from_vectors(project_feasible(r, cp_vec), q)
    logger.debug(f"Purified distance via {method}: {value!r} (steepest candidate {best!r})")
    return min(value, best)
