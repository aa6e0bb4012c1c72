"""Gap metric: known values, symmetry, range, oracles, kernel-side variant."""
import numpy as np
import pytest

from projfdi.exceptions import DimensionError
from projfdi.factorization import normalized_gains
from projfdi.gap import (directed_gap, directed_gap_detailed, gap,
                         kgap_directed, kgap_directed_detailed,
                         windowed_sup_inf)
from projfdi.harness import inject_uncertainty
from projfdi.closed_loop import perturbed_plant
from projfdi.statespace import StateSpaceModel, constant_model, transpose

from conftest import make_random_plant

TOL = 0.02


@pytest.fixture(scope="module")
def detuned_rep():
    return normalized_gains(StateSpaceModel([[0.9]], [[1.0]], [[3.0]], [[0.0]]))


class TestDirectedGap:
    def test_identical_representations(self, s1_rep):
        assert directed_gap(s1_rep, s1_rep, TOL) <= 1e-6

    def test_range(self, s1_rep, detuned_rep):
        for ra, rb in [(s1_rep, detuned_rep), (detuned_rep, s1_rep)]:
            v = directed_gap(ra, rb, TOL)
            assert 0.0 <= v <= 1.0

    def test_scaled_plant_vs_sup_inf_oracle(self, s1, s1_rep):
        rep_b = normalized_gains(StateSpaceModel(s1.A, s1.B, 1.05 * s1.C, s1.D))
        v = directed_gap(s1_rep, rep_b, TOL)
        oracle = windowed_sup_inf(s1_rep, rep_b)
        assert abs(v - oracle) <= 0.05 * max(oracle, 1e-6)

    def test_dimension_mismatch_rejected(self, s1_rep):
        other = normalized_gains(make_random_plant(1, n=2, p=2, m=2))
        with pytest.raises(DimensionError):
            directed_gap(s1_rep, other)


class TestGapMetric:
    def test_identical(self, s1_rep):
        res = gap(s1_rep, s1_rep, TOL)
        assert res.gap <= 1e-6
        assert res.method_bound_kind == "certified"

    def test_static_orthogonal_pair(self):
        # constant images along [1; g] and [1; -1/g] are orthogonal directions
        for g in (2.0, 0.7):
            ra = normalized_gains(constant_model([[g]]))
            rb = normalized_gains(constant_model([[-1.0 / g]]))
            res = gap(ra, rb, 0.01)
            assert abs(res.gap - 1.0) <= 0.01
            # angle oracle: sine of the angle between the unit image vectors
            va = np.array([1.0, g]) / np.hypot(1.0, g)
            vb = np.array([1.0, -1.0 / g]) / np.hypot(1.0, 1.0 / g)
            sine = np.sqrt(max(0.0, 1.0 - float(va @ vb) ** 2))
            assert abs(res.gap - sine) <= 0.01

    def test_static_oblique_pair_angle_oracle(self):
        ra = normalized_gains(constant_model([[1.0]]))
        rb = normalized_gains(constant_model([[3.0]]))
        res = gap(ra, rb, 0.01)
        va = np.array([1.0, 1.0]) / np.sqrt(2.0)
        vb = np.array([1.0, 3.0]) / np.sqrt(10.0)
        sine = np.sqrt(1.0 - float(va @ vb) ** 2)
        assert abs(res.gap - sine) <= 0.01

    @pytest.mark.parametrize("seeds", [(2, 3), (4, 5)])
    def test_symmetry_below_one(self, seeds):
        ra = normalized_gains(make_random_plant(seeds[0], n=2, p=1, m=1,
                                                rho=(0.3, 0.6), d_scale=0.2))
        rb = normalized_gains(make_random_plant(seeds[1], n=3, p=1, m=1,
                                                rho=(0.3, 0.6), d_scale=0.2))
        res = gap(ra, rb, TOL)
        if res.gap < 1.0 - 1e-6:
            assert abs(res.directed_12 - res.directed_21) <= 2 * TOL

    def test_oracle_estimate_is_lower_bound(self, s1_rep, detuned_rep):
        res = gap(s1_rep, detuned_rep, TOL)
        assert res.oracle_estimate <= res.gap + 1e-12

    def test_json_round_trip(self, s1_rep, detuned_rep):
        import json
        res = gap(s1_rep, detuned_rep, TOL)
        obj = json.loads(res.dumps())
        assert obj["gap"] == res.gap
        assert set(obj) >= {"directed_12", "directed_21", "gap",
                            "method_bound_kind", "oracle_estimate"}


class TestUncertaintyBall:
    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_factor_perturbation_inside_ball(self, s1_rep, seed):
        # a right-factor perturbation of norm d moves the image subspace by
        # at most d in the directed gap
        d = 0.25
        draw = inject_uncertainty(s1_rep, "right-coprime", d, seed)
        plant = perturbed_plant(s1_rep, draw.delta_den, draw.delta_num)
        rep_p = normalized_gains(plant)
        v = directed_gap(rep_p, s1_rep, TOL)
        assert v <= d + TOL


class TestKernelGap:
    def test_identical(self, s1_rep):
        assert kgap_directed(s1_rep, s1_rep) <= 1e-6

    def test_range(self, s1_rep, detuned_rep):
        v = kgap_directed(s1_rep, detuned_rep)
        assert 0.0 <= v <= 1.0

    @pytest.mark.parametrize("seeds", [(6, 7), (8, 9)])
    def test_duality_oracle(self, seeds):
        # kernel-side value equals the image-side value of the transposed
        # plants, normalized from scratch on the transposed realizations
        ga = make_random_plant(seeds[0], n=2, p=1, m=1, rho=(0.3, 0.7))
        gb = make_random_plant(seeds[1], n=3, p=1, m=1, rho=(0.3, 0.7))
        ra, rb = normalized_gains(ga), normalized_gains(gb)
        k = kgap_directed_detailed(ra, rb, TOL)
        dual = directed_gap_detailed(normalized_gains(transpose(ga)),
                                     normalized_gains(transpose(gb)), TOL)
        assert abs(k.value - dual.value) <= k.spread + dual.spread + 1e-9
