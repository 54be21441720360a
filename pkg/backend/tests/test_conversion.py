import math

import pytest
from hypothesis import given, settings as hsettings

from app.core.exceptions import ValidationError
from app.core.majorization import e1, make_prob_vec, majorizes, trace_distance, uniform
from app.models.reports import EnsembleSchema
from app.services.conversion_service import (
    Ensemble,
    conversion_service,
    discrimination_bound,
    ensemble_convertible,
    nielsen_convertible,
    pure_to_mixed_check,
    sandwich_bounds,
    star_distance,
    star_distance_value,
)
from strategies import entangled_prob_vecs, prob_vecs, random_prob_vec


class TestNielsen:
    def test_towards_less_entangled(self):
        assert nielsen_convertible(make_prob_vec([0.5, 0.5]), make_prob_vec([0.8, 0.2]))

    def test_towards_more_entangled(self):
        assert not nielsen_convertible(make_prob_vec([0.8, 0.2]), make_prob_vec([0.5, 0.5]))

    def test_maximally_entangled_source(self, rng):
        for _ in range(50):
            assert nielsen_convertible(uniform(4), random_prob_vec(rng, 4))


class TestEnsemble:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="sum"):
            Ensemble([(0.5, uniform(2)), (0.4, e1(2))])

    def test_weight_range(self):
        with pytest.raises(ValidationError, match="member 1"):
            Ensemble([(0.5, uniform(2)), (1.5, e1(2))])

    def test_from_schema_names_member(self):
        schema = EnsembleSchema.model_validate({"members": [
            {"weight": 0.5, "state": [0.5, 0.5]},
            {"weight": 0.5, "state": [0.7, -0.3]},
        ]})
        with pytest.raises(ValidationError, match="member 1"):
            Ensemble.from_schema(schema)

    def test_single_member_reduces_to_nielsen(self, rng):
        for _ in range(100):
            psi = random_prob_vec(rng, 3)
            phi = random_prob_vec(rng, 3)
            convertible, _, _ = ensemble_convertible(psi, Ensemble([(1.0, phi)]))
            assert convertible == nielsen_convertible(psi, phi)

    def test_mixture_of_separable_and_maximal(self):
        ens = Ensemble([(0.5, make_prob_vec([1.0, 0.0])), (0.5, make_prob_vec([0.5, 0.5]))])
        convertible, worst_k, margin = ensemble_convertible(make_prob_vec([0.5, 0.5]), ens)
        assert convertible
        # E_1 margin is 0.5 - 0.25; the binding index is the trivial k = 2
        assert worst_k == 2
        assert margin == pytest.approx(0.0, abs=1e-15)

    def test_separable_source_cannot_create_entanglement(self):
        ens = Ensemble([(0.9, e1(2)), (0.1, make_prob_vec([0.6, 0.4]))])
        assert not ensemble_convertible(e1(2), ens)[0]

    def test_pure_to_mixed(self):
        psi = make_prob_vec([0.6, 0.3, 0.1])
        assert pure_to_mixed_check(psi, Ensemble([(1.0, psi)]))
        assert not pure_to_mixed_check(e1(2), Ensemble([(0.5, e1(2)), (0.5, uniform(2))]))


class TestStarDistance:
    def test_closed_formula(self):
        d, k = star_distance_value(make_prob_vec([0.7, 0.2, 0.1]), make_prob_vec([0.5, 0.3, 0.2]))
        assert d == pytest.approx(0.2)
        assert k == 1

    def test_reachable_target(self):
        d, _ = star_distance_value(make_prob_vec([0.5, 0.3, 0.2]), make_prob_vec([0.7, 0.2, 0.1]))
        assert d == 0.0

    def test_separable_source(self):
        q = make_prob_vec([0.5, 0.3, 0.2])
        d, k = star_distance_value(e1(3), q)
        assert d == pytest.approx(0.5)
        assert d == pytest.approx(trace_distance(e1(3), q))
        assert k == 1

    def test_report_fields(self):
        report = star_distance(make_prob_vec([0.7, 0.2, 0.1]), make_prob_vec([0.5, 0.3, 0.2]))
        assert report.d_star == pytest.approx(0.2)
        assert report.sandwich_lo == pytest.approx(0.02)
        assert report.sandwich_hi == pytest.approx(math.sqrt(0.4))
        assert report.discrimination_bound == pytest.approx(0.6)
        assert report.dim == 3
        assert report.rank_psi == 3

    def test_discrimination_input_choice(self):
        psi, phi = make_prob_vec([0.7, 0.2, 0.1]), make_prob_vec([0.5, 0.3, 0.2])
        report = star_distance(psi, phi, discrimination_input="sandwich_hi")
        assert report.discrimination_bound == pytest.approx(0.5 * (1 + math.sqrt(0.4)))
        with pytest.raises(ValidationError):
            star_distance(psi, phi, discrimination_input="purified")

    def test_service_report_with_lp_oracle(self):
        report = conversion_service.report(make_prob_vec([0.7, 0.2, 0.1]), make_prob_vec([0.5, 0.3, 0.2]),
                                           oracle="lp")
        assert report.oracle == "lp"
        assert report.d_star_oracle == pytest.approx(report.d_star, abs=1e-9)
        assert report.d_star_purified is None

    @given(prob_vecs(), prob_vecs(), prob_vecs())
    @hsettings(max_examples=1000, deadline=None)
    def test_triangle_inequality(self, p, q, r):
        d_pr, _ = star_distance_value(p, r)
        d_pq, _ = star_distance_value(p, q)
        d_qr, _ = star_distance_value(q, r)
        assert d_pr <= d_pq + d_qr + 1e-12

    @given(prob_vecs(), prob_vecs())
    @hsettings(max_examples=1000, deadline=None)
    def test_zero_iff_majorized(self, p, q):
        d, _ = star_distance_value(p, q)
        assert (d == 0.0) == majorizes(q, p)

    @given(entangled_prob_vecs(), entangled_prob_vecs())
    @hsettings(max_examples=1000, deadline=None)
    def test_separable_dominance(self, p, q):
        d, _ = star_distance_value(p, q)
        d_separable, _ = star_distance_value(e1(p.dim), q)
        assert d_separable == pytest.approx(1.0 - q.p1)
        assert d < 1.0 - q.p1


class TestBounds:
    @pytest.mark.parametrize("d, expected", [(0.0, (0.0, 0.0)), (0.5, (0.125, 1.0)), (1.0, (0.5, math.sqrt(2)))])
    def test_sandwich(self, d, expected):
        assert sandwich_bounds(d) == pytest.approx(expected)

    @pytest.mark.parametrize("d, expected", [(0.0, 0.5), (1.0, 1.0), (0.2, 0.6)])
    def test_discrimination(self, d, expected):
        assert discrimination_bound(d) == pytest.approx(expected)

    @pytest.mark.parametrize("d", [-0.1, 1.5, float("nan")])
    def test_out_of_range(self, d):
        with pytest.raises(ValidationError):
            sandwich_bounds(d)
        with pytest.raises(ValidationError):
            discrimination_bound(d)
