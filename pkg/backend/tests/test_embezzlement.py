import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from app.core.exceptions import ValidationError
from app.core.majorization import make_prob_vec, uniform
from app.models.family import FamilySpec
from app.services.conversion_service import star_distance_value
from app.services.embezzlement_service import (
    embezzle_distance,
    embezzlement_service,
    evaluate_member,
    evaluate_streaming,
    parse_schedule,
    tensor_with_e1,
    tensor_with_uniform,
    thm2_criterion,
)
from app.services.family_service import family_member, generalized_harmonic
from strategies import prob_vecs, random_prob_vec

DECADES = [10 ** j for j in range(1, 7)]


class TestTensorProducts:
    def test_uniform_on_separable(self):
        assert tensor_with_uniform(make_prob_vec([1.0]), 3).to_list() == pytest.approx([1 / 3] * 3)

    def test_uniform_splits_each_coefficient(self):
        p = make_prob_vec([2, 1], policy="renormalize")
        assert tensor_with_uniform(p, 2).to_list() == pytest.approx([1 / 3, 1 / 3, 1 / 6, 1 / 6])

    def test_identity_factor(self):
        p = make_prob_vec([0.6, 0.4])
        assert tensor_with_uniform(p, 1) == p
        assert tensor_with_e1(p, 1) == p

    def test_e1_pads_with_zeros(self):
        padded = tensor_with_e1(make_prob_vec([0.5, 0.5]), 2)
        assert padded.to_list() == [0.5, 0.5, 0.0, 0.0]
        assert padded.rank == 2

    def test_factor_validated(self):
        with pytest.raises(ValidationError):
            tensor_with_uniform(uniform(2), 0)


class TestEmbezzleDistance:
    def test_two_level_vdh(self):
        evaluation = embezzle_distance(make_prob_vec([2, 1], policy="renormalize"), 2)
        assert evaluation.d_star_value == pytest.approx(1 / 3)

    def test_separable_member_embezzles_nothing(self):
        assert embezzle_distance(make_prob_vec([1.0]), 2).d_star_value == 0.5

    def test_m_validated(self):
        with pytest.raises(ValidationError):
            embezzle_distance(uniform(3), 1)

    def test_uniform_law(self):
        for n in range(1, 1001):
            p = uniform(n)
            for m in (2, 3, 4, 5):
                assert embezzle_distance(p, m).d_star_value == pytest.approx(1.0 - 1.0 / m, abs=1e-12)

    def test_matches_star_distance_of_tensor_products(self, rng):
        for _ in range(1000):
            p = random_prob_vec(rng, int(rng.integers(1, 51)), sparsity=0.1)
            m = int(rng.integers(2, 6))
            expected, _ = star_distance_value(tensor_with_e1(p, m), tensor_with_uniform(p, m))
            assert embezzle_distance(p, m).d_star_value == pytest.approx(expected, abs=1e-12)

    @given(prob_vecs(max_dim=40), st.integers(min_value=2, max_value=5))
    @hsettings(max_examples=1000, deadline=None)
    def test_lower_bound_from_first_coefficient(self, p, m):
        assert embezzle_distance(p, m).d_star_value >= p.p1 * (1.0 - 1.0 / m) - 1e-12

    @given(prob_vecs(max_dim=40), st.integers(min_value=2, max_value=8))
    @hsettings(max_examples=1000, deadline=None)
    def test_two_level_target_suffices(self, p, m):
        two = embezzle_distance(p, 2).d_star_value
        assert embezzle_distance(p, m).d_star_value <= math.ceil(math.log2(m)) * two + 1e-12


class TestCriterion:
    def test_separable(self):
        value, l = thm2_criterion(make_prob_vec([1.0, 0.0, 0.0]))
        assert value == 1.0
        assert l == 1

    @pytest.mark.parametrize("n", [2, 4, 10, 100])
    def test_uniform_even_dimension(self, n):
        value, _ = thm2_criterion(uniform(n))
        assert value == pytest.approx(0.5)

    def test_vdh_criterion_decays(self):
        values = [thm2_criterion(family_member(FamilySpec.vdh(), n))[0] for n in (10, 1000, 100000)]
        assert values[0] > values[1] > values[2]

    @pytest.mark.parametrize("spec", [
        FamilySpec.vdh(),
        FamilySpec.power(-0.5),
        FamilySpec.power(1.0),
        FamilySpec.power(-2.0),
        FamilySpec.logcorrected(1.0),
        FamilySpec.oscillating(),
        FamilySpec.constant(1.0),
    ], ids=lambda spec: spec.label)
    def test_criterion_and_distance_bound_each_other(self, spec):
        for e in embezzlement_service.embezzle_scan(spec, 2, [10, 100, 1000, 10000], threads=2):
            assert e.error is None
            assert e.d_star_value <= 3.0 * e.criterion_value + 2.0 * e.p1 + 1e-12, e
            assert e.criterion_value <= 3.0 * e.d_star_value + 2.0 * e.p1 + 1e-12, e


class TestStreaming:
    @pytest.mark.parametrize("spec", [
        FamilySpec.vdh(),
        FamilySpec.power(-0.5),
        FamilySpec.power(1.0),
        FamilySpec.power(2.0),
        FamilySpec.logcorrected(2.0),
        FamilySpec.exponential(-0.01),
        FamilySpec.constant(3.0),
    ], ids=lambda spec: spec.label)
    @pytest.mark.parametrize("m", [2, 3])
    def test_matches_materialized(self, spec, m):
        n = 5000
        streamed = evaluate_streaming(spec, n, m, chunk=97)
        direct = embezzle_distance(family_member(spec, n), m)
        assert streamed.streamed
        assert streamed.d_star_value == pytest.approx(direct.d_star_value, abs=1e-12)
        assert streamed.criterion_value == pytest.approx(direct.criterion_value, abs=1e-12)
        assert streamed.p1 == pytest.approx(direct.p1, rel=1e-12)

    def test_non_monotone_family_is_materialized(self):
        evaluation = evaluate_member(FamilySpec.oscillating(), 2000, 2)
        assert not evaluation.streamed
        assert 0.0 < evaluation.d_star_value < 1.0

    def test_n_validated(self):
        with pytest.raises(ValidationError):
            evaluate_member(FamilySpec.vdh(), 0, 2)


class TestScan:
    def test_vdh_below_analytic_bound(self):
        scan = embezzlement_service.embezzle_scan(FamilySpec.vdh(), 2, DECADES)
        assert [e.n for e in scan] == DECADES
        for evaluation in scan:
            assert evaluation.ok
            assert evaluation.bound == pytest.approx((1.0 + math.log(2.0)) / generalized_harmonic(evaluation.n, 1.0))
            assert evaluation.d_star_value <= evaluation.bound
        values = [e.d_star_value for e in scan]
        assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))

    def test_vdh_embezzles_at_large_n(self):
        evaluation = evaluate_member(FamilySpec.vdh(), 10 ** 6, 2)
        assert evaluation.d_star_value < 0.1
        assert evaluation.criterion_value < 0.1

    @pytest.mark.parametrize("spec", [FamilySpec.power(0.0), FamilySpec.power(1.0)], ids=["power0", "power1"])
    def test_non_embezzling_families_stay_away_from_zero(self, spec):
        for evaluation in embezzlement_service.embezzle_scan(spec, 2, [10, 100, 1000, 10000, 100000]):
            assert evaluation.d_star_value > 0.3
            assert evaluation.criterion_value > 0.3

    @pytest.mark.parametrize("m", [2, 3, 5])
    def test_constant_family_is_exact(self, m):
        for evaluation in embezzlement_service.embezzle_scan(FamilySpec.power(0.0), m, [1, 7, 100, 12345]):
            assert evaluation.d_star_value == pytest.approx(1.0 - 1.0 / m, abs=1e-12)
            assert evaluation.bound == pytest.approx(1.0 - 1.0 / m)

    def test_four_level_target_at_most_twice_two_level(self):
        two = embezzlement_service.embezzle_scan(FamilySpec.vdh(), 2, DECADES[:5])
        four = embezzlement_service.embezzle_scan(FamilySpec.vdh(), 4, DECADES[:5])
        for a, b in zip(two, four):
            assert b.d_star_value <= 2.0 * a.d_star_value + 1e-12

    def test_domain_overflow_becomes_error_entry(self):
        table = FamilySpec.custom([1.0, 50.0, 100.0], [1.0, 0.5, 0.1], source="table.csv")
        scan = embezzlement_service.embezzle_scan(table, 2, [10, 100, 1000], threads=3)
        assert [e.n for e in scan] == [10, 100, 1000]
        assert scan[0].ok and scan[1].ok
        assert not scan[2].ok
        assert "exceeds the domain" in scan[2].error
        assert scan[2].d_star_value is None

    def test_schedule_must_increase(self):
        with pytest.raises(ValidationError):
            embezzlement_service.embezzle_scan(FamilySpec.vdh(), 2, [100, 10])


class TestParseSchedule:
    def test_geometric(self):
        assert parse_schedule("geometric:10,10,6") == DECADES

    def test_list(self):
        assert parse_schedule("list:5,50,500") == [5, 50, 500]

    def test_real_valued(self):
        assert parse_schedule("geometric:1000,2,3", integer=False) == [1000.0, 2000.0, 4000.0]

    @pytest.mark.parametrize("text", ["geometric:10,10", "list:", "list:3,2", "linear:1,2,3", "list:a,b",
                                      "geometric:0,10,3"])
    def test_invalid(self, text):
        with pytest.raises(ValidationError):
            parse_schedule(text)


def test_family_member_lower_bound_with_p1():
    p = family_member(FamilySpec.power(-1.5), 1000)
    evaluation = embezzle_distance(p, 3)
    assert evaluation.d_star_value >= p.p1 * (2 / 3) - 1e-12
    assert np.isclose(evaluation.p1, p.p1)
