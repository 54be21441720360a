"""
Integral asymptotics M(y) of families, combined limit reports and the alpha table.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.optimize import bisect, minimize_scalar
from tqdm import tqdm

from config.settings import settings
from app.core.exceptions import ConvergenceError, DomainError, EmbezzleMeterError, ValidationError
from app.models.family import FamilySpec
from app.models.reports import AsymptoticsReport, IntegralPoint
from app.services.embezzlement_service import embezzlement_service, evaluate_member, validate_schedule
from app.services.family_service import analytic_limit_power, analytic_report, check_m, divergence_check

logger = logging.getLogger(__name__)

DEFAULT_Y_SCHEDULE = [1000.0 * 2 ** j for j in range(15)]
DERIVATIVE_SAMPLES = 256
GRID_SAMPLES = 4096
AGREEMENT_TOL = 1e-6
FIGURE1_N_VALUES = (10 ** 6, 10 ** 7)
FIGURE1_COLUMNS = ["alpha", "limit_or_nan", "lower", "upper"]

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


def finite_n_column(n: int) -> str:
    return f"finite_n_estimate(n={n})"


def integrand(spec: FamilySpec, y: float) -> Callable[[float], float]:
    """g(., y): f(x)/f(1) for decreasing f, f(y+1-x)/f(y) for increasing f."""
    if y > spec.domain_max:
        raise DomainError(f"y = {y!r} exceeds the domain of {spec.label} (x <= {spec.domain_max!r})")
    if spec.monotonicity == "increasing":
        anchor = float(spec.log_f(y))
        return lambda x: math.exp(float(spec.log_f(y + 1.0 - x)) - anchor)
    anchor = float(spec.log_f(1.0))
    return lambda x: math.exp(float(spec.log_f(x)) - anchor)


def _vector_integrand(spec: FamilySpec, y: float) -> Callable[[np.ndarray], np.ndarray]:
    if spec.monotonicity == "increasing":
        anchor = float(spec.log_f(y))
        return lambda x: np.exp(spec.log_f(np.maximum(y + 1.0 - x, 1.0)) - anchor)
    anchor = float(spec.log_f(1.0))
    return lambda x: np.exp(spec.log_f(x) - anchor)


def _integrate(g: Callable[[float], float], lo: float, hi: float, tol: float,
               breakpoints: Sequence[float] = ()) -> float:
    """Integral of g over [lo, hi], substituted x = e^t; breakpoints inside (lo, hi) split the range."""
    if hi <= lo:
        return 0.0
    inner = [math.log(b) for b in breakpoints if lo < b < hi]
    options = {"limit": 500}
    if inner:
        options = {"points": inner, "limit": max(500, 4 * (len(inner) + 2))}
    result = quad(lambda t: g(math.exp(t)) * math.exp(t), math.log(lo), math.log(hi),
                  epsabs=tol, epsrel=tol, full_output=1, **options)
    if len(result) > 3:
        raise ConvergenceError(f"quadrature on [{lo!r}, {hi!r}] did not converge: {result[3]}",
                               best_value=float(result[0]))
    return float(result[0])


def window_integral(spec: FamilySpec, y: float, lo: float, hi: float, tol: float) -> float:
    """Integral of g(., y) over [lo, hi]; increasing f is integrated in the reflected variable y + 1 - x."""
    if hi <= lo:
        return 0.0
    if spec.monotonicity == "increasing":
        anchor = float(spec.log_f(y))
        return _integrate(lambda u: math.exp(float(spec.log_f(u)) - anchor), y + 1.0 - hi, y + 1.0 - lo, tol,
                          spec.breakpoints)
    return _integrate(integrand(spec, y), lo, hi, tol, spec.breakpoints)


def integral_point(spec: FamilySpec, m: int, y: float, quad_tol: float,
                   cross_check: bool = False) -> IntegralPoint:
    """M(y) = max over 1 <= a <= y/m of int_a^{am} g / int_1^y g.

    Candidates come from derivative sign changes, the endpoints and the refined maximum of a
    4096-point grid; M is the largest of them. With cross_check a derivative maximum that falls
    short of the grid is an error instead of a warning.
    """
    upper_a = y / m
    if upper_a < 1.0:
        raise ValidationError(f"y must be at least m (y = {y!r}, m = {m})")
    g = integrand(spec, y)
    total = window_integral(spec, y, 1.0, y, quad_tol)

    def window(a: float) -> float:
        return window_integral(spec, y, a, a * m, quad_tol)

    def derivative(a: float) -> float:
        return m * g(a * m) - g(a)

    samples = np.geomspace(1.0, upper_a, DERIVATIVE_SAMPLES) if upper_a > 1.0 else np.array([1.0])
    signs = np.array([derivative(a) for a in samples])
    candidates = [1.0, upper_a]
    for i in np.flatnonzero((signs[:-1] > 0) & (signs[1:] < 0)):
        candidates.append(bisect(derivative, samples[i], samples[i + 1], xtol=1e-12))
    derivative_a, derivative_value = _best(window, candidates)

    grid, grid_M, i = _grid_maximum(spec, y, m, upper_a)
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    fallback = [float(grid[i])]
    if hi > lo:
        search = minimize_scalar(lambda a: -window(a), bounds=(lo, hi), method="bounded")
        if search.success:
            fallback.append(float(search.x))
    best_a, best_value = _best(window, fallback, (derivative_a, derivative_value))

    derivative_M = _ratio(derivative_value, total)
    M = _ratio(best_value, total)
    if M - derivative_M > AGREEMENT_TOL:
        message = (f"derivative scan for {spec.label} at y = {y!r} found M = {derivative_M!r} "
                   f"but the grid reaches {M!r} at a = {best_a!r}")
        if cross_check:
            raise ConvergenceError(message, best_value=M)
        logger.warning(f"⚠️ {message}; using the grid maximum")

    return IntegralPoint(y=y, M=M, maximizer=best_a, derivative_M=derivative_M,
                         grid_M=grid_M, grid_maximizer=float(grid[i]))


def _best(window: Callable[[float], float], candidates: Sequence[float],
          start: Tuple[float, float] = (1.0, -math.inf)) -> Tuple[float, float]:
    best_a, best_value = start
    for a in candidates:
        value = window(a)
        if value > best_value:
            best_a, best_value = a, value
    return best_a, best_value


def _ratio(value: float, total: float) -> float:
    return min(1.0, max(0.0, value / total))


def _grid_maximum(spec: FamilySpec, y: float, m: int, upper_a: float) -> Tuple[np.ndarray, float, int]:
    """Window ratios on a log-spaced grid of a; returns (grid, best ratio, best index)."""
    grid = np.geomspace(1.0, upper_a, GRID_SAMPLES) if upper_a > 1.0 else np.array([1.0])
    kinks = np.asarray(spec.breakpoints, dtype=np.float64)
    if spec.monotonicity == "increasing":
        kinks = y + 1.0 - kinks
    kinks = kinks[(kinks > 1.0) & (kinks < y)]
    nodes, inverse = np.unique(np.concatenate([grid, grid * m, kinks]), return_inverse=True)

    # Gauss-Legendre in t = ln x on every node interval; f is smooth between nodes
    t = np.log(nodes)
    mid, half = 0.5 * (t[1:] + t[:-1]), 0.5 * (t[1:] - t[:-1])
    xs = np.exp(mid[:, None] + half[:, None] * _GAUSS_NODES[None, :])
    segments = half * ((_vector_integrand(spec, y)(xs) * xs) @ _GAUSS_WEIGHTS)

    running = np.concatenate([[0.0], np.cumsum(segments)])
    starts, ends = inverse[:grid.size], inverse[grid.size:2 * grid.size]
    values = running[ends] - running[starts]
    i = int(np.argmax(values))
    return grid, _ratio(float(values[i]), float(running[-1])), i




class AsymptoticsService:
    """Analytic and numeric limit reports for embezzling families."""

    def integral_asymptotics(self, spec: FamilySpec, m: int, y_schedule: Optional[Sequence[float]] = None,
                             quad_tol: Optional[float] = None, cross_check: bool = False,
                             threads: Optional[int] = None) -> AsymptoticsReport:
        check_m(m)
        y_schedule = [float(y) for y in validate_schedule(y_schedule or DEFAULT_Y_SCHEDULE)]
        quad_tol = settings.quad_tol if quad_tol is None else quad_tol
        if spec.monotonicity is None:
            logger.warning(f"⚠️ {spec.label} is not monotone; integrating f(x) directly")

        divergence_warning = divergence_check(spec, int(min(y_schedule[-1], 1e6)))

        def work(y: float) -> IntegralPoint:
            try:
                return integral_point(spec, m, y, quad_tol, cross_check=cross_check)
            except EmbezzleMeterError as e:
                logger.warning(f"⚠️ M({y!r}) for {spec.label}: {str(e)}")
                return IntegralPoint(y=y, error=str(e))

        with ThreadPoolExecutor(max_workers=threads or settings.worker_count) as pool:
            points = list(tqdm(pool.map(work, y_schedule), total=len(y_schedule),
                               disable=not settings.progress, desc=f"M(y) {spec.label}"))

        numeric = [(p.y, p.M) for p in points if p.error is None]
        tail = [value for _, value in numeric[len(numeric) // 2:]]
        return analytic_report(spec, m).model_copy(update={
            "numeric_M": numeric,
            "points": points,
            "tail_inf": min(tail) if tail else None,
            "tail_sup": max(tail) if tail else None,
            "divergence_warning": divergence_warning,
        })

    def family_limit(self, spec: FamilySpec, m: int, numeric: bool = False,
                     y_schedule: Optional[Sequence[float]] = None,
                     finite_n_schedule: Optional[Sequence[int]] = None,
                     cross_check: bool = False) -> AsymptoticsReport:
        """Analytic values, optionally with the M(y) trajectory and a finite-n tail."""
        if numeric:
            report = self.integral_asymptotics(spec, m, y_schedule, cross_check=cross_check)
        else:
            report = analytic_report(spec, m)
        if finite_n_schedule:
            scan = embezzlement_service.embezzle_scan(spec, m, finite_n_schedule)
            tail = [(e.n, e.d_star_value) for e in scan if e.error is None]
            report = report.model_copy(update={"finite_n_tail": tail})
        return report

    def figure1_table(self, m: int, alphas: Sequence[float],
                      n_values: Sequence[int] = FIGURE1_N_VALUES,
                      threads: Optional[int] = None) -> pd.DataFrame:
        """Rows of alpha, analytic limit/bounds and finite-n embezzlement distances."""
        check_m(m)
        n_values = [int(n) for n in validate_schedule(n_values)]
        logger.info(f"🔄 Building alpha table for m={m}: {len(alphas)} values of alpha, n in {n_values}")

        def row(alpha: float) -> Dict[str, float]:
            report = analytic_limit_power(alpha, m)
            out = {
                "alpha": float(alpha),
                "limit_or_nan": _or_nan(report.analytic_limit),
                "lower": _or_nan(report.analytic_lower),
                "upper": _or_nan(report.analytic_upper),
            }
            spec = FamilySpec.vdh() if alpha == -1.0 else FamilySpec.power(alpha)
            for n in n_values:
                try:
                    out[finite_n_column(n)] = evaluate_member(spec, n, m).d_star_value
                except EmbezzleMeterError as e:
                    logger.warning(f"⚠️ alpha={alpha!r}, n={n}: {str(e)}")
                    out[finite_n_column(n)] = math.nan
            return out

        with ThreadPoolExecutor(max_workers=threads or settings.worker_count) as pool:
            rows = list(tqdm(pool.map(row, alphas), total=len(alphas),
                             disable=not settings.progress, desc="alpha table"))
        logger.info("✅ Alpha table completed")
        return pd.DataFrame(rows, columns=FIGURE1_COLUMNS + [finite_n_column(n) for n in n_values])


def _or_nan(value: Optional[float]) -> float:
    return math.nan if value is None else float(value)


def parse_alpha_range(text: str) -> List[float]:
    """'start:step:stop' (inclusive) into a list of alpha values; the step's sign is ignored."""
    parts = (text or "").split(":")
    try:
        start, step, stop = (float(v) for v in parts)
    except ValueError:
        raise ValidationError(f"alpha range must be START:STEP:STOP, got '{text}'")
    if not all(math.isfinite(v) for v in (start, step, stop)):
        raise ValidationError(f"alpha range must be finite, got '{text}'")
    if start == stop:
        return [start]
    span = abs(stop - start)
    step = abs(step)
    if step == 0.0 or step > span:
        raise ValidationError(f"alpha step {step!r} out of range for [{start!r}, {stop!r}]")
    count = int(math.floor(span / step + 1e-9)) + 1
    sign = 1.0 if stop > start else -1.0
    return [round(start + sign * i * step, 12) for i in range(count)]


asymptotics_service = AsymptoticsService()
