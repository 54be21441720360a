import math

import numpy as np
import pytest

from app.core.exceptions import ConvergenceError, ValidationError
from app.core.majorization import e1, make_prob_vec, majorizes
from app.core.oracles import oracle_max_fidelity_over_majorizing
from app.services.conversion_service import conversion_service, star_distance_value
from app.services.purified_optimizer import (
    frank_wolfe,
    project_feasible,
    purified_from_vectors,
    star_distance_purified,
)
from strategies import random_prob_vec


def as_fidelity(purified: float) -> float:
    return math.sqrt(max(0.0, 1.0 - purified * purified))


def test_reachable_target_is_zero():
    psi = make_prob_vec([0.5, 0.3, 0.2])
    phi = make_prob_vec([0.7, 0.2, 0.1])
    assert star_distance_purified(psi, phi) == 0.0


def test_separable_source_has_single_feasible_point():
    value = star_distance_purified(e1(2), make_prob_vec([0.5, 0.5]))
    assert value == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_unknown_method():
    with pytest.raises(ValidationError):
        star_distance_purified(make_prob_vec([0.6, 0.4]), make_prob_vec([0.5, 0.5]), method="newton")


def test_project_feasible_restores_majorization():
    psi = make_prob_vec([0.6, 0.3, 0.1])
    cp_vec = psi.prefixed_cumulative()[1:]
    r = project_feasible(np.array([0.58, 0.31, 0.11]), cp_vec)
    assert r.sum() == pytest.approx(1.0)
    assert np.all(np.diff(r) <= 0)
    assert np.all(np.cumsum(r) >= cp_vec - 1e-12)


def test_project_feasible_keeps_point_with_saturated_prefix():
    # cumulative sums reach 1 before the last index; the source exceeds 1 only by rounding
    r = np.array([0.5, 0.5, 0.0, 0.0])
    cp_vec = np.array([0.3, 1.0 + 2.0 ** -52, 1.0, 1.0])
    with np.errstate(divide="raise", invalid="raise"):
        out = project_feasible(r, cp_vec)
    assert np.array_equal(out, r)


def test_project_feasible_ignores_rounding_deficit():
    r = np.array([0.5, 0.25, 0.25])
    cp_vec = np.array([np.nextafter(0.5, 1.0), 0.75, 1.0])
    assert np.array_equal(project_feasible(r, cp_vec), r)


def test_frank_wolfe_reports_non_convergence():
    def problem(x):
        return float(-np.sum(x * x)), -2.0 * x

    def solve_lp(gradient):
        s = np.zeros_like(gradient)
        s[int(np.argmax(gradient))] = 1.0
        return s

    with pytest.raises(ConvergenceError) as info:
        frank_wolfe(np.array([1.0, 0.0, 0.0]), problem, solve_lp, maxiter=3, duality_gap_tol=1e-15)
    assert info.value.best_value is not None


def test_frank_wolfe_matches_conic_solver():
    psi = make_prob_vec([0.6, 0.3, 0.1])
    phi = make_prob_vec([0.34, 0.33, 0.33])
    conic = star_distance_purified(psi, phi, method="cvxpy")
    fw = star_distance_purified(psi, phi, method="frank-wolfe", tol=1e-7)
    assert as_fidelity(fw) == pytest.approx(as_fidelity(conic), abs=1e-4)
    # r = psi is optimal for a flat target
    assert conic == pytest.approx(purified_from_vectors(psi.entries, phi.entries), abs=1e-6)


def test_frank_wolfe_two_level():
    psi = make_prob_vec([0.8, 0.2])
    phi = make_prob_vec([0.6, 0.4])
    expected = purified_from_vectors(psi.entries, phi.entries)
    assert star_distance_purified(psi, phi, method="frank-wolfe", tol=1e-8) == pytest.approx(expected, abs=1e-6)


def test_agrees_with_fidelity_grid_oracle(rng):
    for i in range(100):
        dim = 2 + i % 2
        psi = random_prob_vec(rng, dim)
        phi = random_prob_vec(rng, dim)
        value = star_distance_purified(psi, phi)
        oracle = oracle_max_fidelity_over_majorizing(psi, phi)
        assert as_fidelity(value) == pytest.approx(oracle, abs=1e-4), (psi, phi)


def _check_sandwich(rng, count):
    for _ in range(count):
        dim = int(rng.integers(2, 21))
        psi = random_prob_vec(rng, dim, sparsity=0.2)
        phi = random_prob_vec(rng, int(rng.integers(2, 21)), sparsity=0.2)
        d_star, _ = star_distance_value(psi, phi)
        value = star_distance_purified(psi, phi)
        assert d_star - 1e-9 <= value <= math.sqrt(2.0 * d_star) + 1e-4, (psi, phi, d_star, value)
        if d_star == 0.0:
            assert majorizes(phi, psi)


def test_sandwich_between_star_distance_and_its_root(rng):
    _check_sandwich(rng, 50)


@pytest.mark.slow
def test_sandwich_thousand_instances(rng):
    _check_sandwich(rng, 1000)


def test_report_includes_purified_value():
    report = conversion_service.report(make_prob_vec([0.7, 0.2, 0.1]), make_prob_vec([0.5, 0.3, 0.2]),
                                       purified=True)
    assert report.purified_method == "cvxpy"
    assert report.d_star - 1e-9 <= report.d_star_purified <= math.sqrt(2 * report.d_star) + 1e-9
