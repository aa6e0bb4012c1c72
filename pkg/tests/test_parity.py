"""Finite-horizon I/O models: structure, identification, parity residual."""
import numpy as np
import pytest

from projfdi.exceptions import (DimensionError, IdentificationError,
                                StructuralError)
from projfdi.factorization import normalized_gains
from projfdi.parity import (build_io_model, deadbeat_observer_gain,
                            identify_io_model, io_threshold, parity_residual,
                            sliding_windows, stack_past)
from projfdi.harness import io_matrix_uncertainty
from projfdi.signals import SignalWindow
from projfdi.statespace import StateSpaceModel, constant_model, simulate

from conftest import make_random_plant


@pytest.fixture(scope="module")
def plant3():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3))
    A *= 0.6 / max(abs(np.linalg.eigvals(A)))
    return StateSpaceModel(A, rng.standard_normal((3, 1)),
                           rng.standard_normal((1, 3)), [[0.2]])


@pytest.fixture(scope="module")
def io3(plant3):
    return build_io_model(plant3, deadbeat_observer_gain(plant3), s=3, s_p=3)


class TestBuild:
    def test_markov_toeplitz_structure(self, plant3, io3):
        g = plant3
        assert np.allclose(io3.H_us[0, 0], g.D[0, 0])
        assert np.allclose(io3.H_us[1, 0], (g.C @ g.B)[0, 0])
        assert np.allclose(io3.H_us[2, 1], (g.C @ g.B)[0, 0])
        assert np.allclose(io3.H_us[3, 0], (g.C @ g.A @ g.A @ g.B)[0, 0])
        assert np.all(io3.H_us[0, 1:] == 0.0)

    def test_static_system(self):
        g = constant_model([[2.0, -1.0]])  # y = 2 u0 - u1
        io = build_io_model(g, np.zeros((0, 1)), s=2, s_p=1)
        assert io.Gamma_s.shape == (3, 0)
        u_s = np.array([1.0, 0.0, 0.5, 1.0, -1.0, 2.0])
        y_s = np.array([2.0, 0.0, -4.0])   # rows of D applied per step
        z_p = np.zeros(io.past_len)
        _, nrm = parity_residual(io, z_p, u_s, y_s)
        assert nrm <= 1e-12

    def test_scalar_deadbeat_exact(self, s1):
        io = build_io_model(s1, [[0.5]], s=2, s_p=2)
        assert io.staleness <= 1e-12
        rng = np.random.default_rng(3)
        u = SignalWindow(rng.standard_normal((40, 1)), 0)
        y = simulate(s1, u)
        for k in (10, 20, 30):
            z_p, u_s, y_s = stack_past(u, y, k, 2, 2)
            _, nrm = parity_residual(io, z_p, u_s, y_s)
            assert nrm <= 1e-10

    @pytest.mark.parametrize("seed", [4, 5])
    def test_normalized_forms(self, seed):
        g = make_random_plant(seed, n=3)
        rep = normalized_gains(g)
        io = build_io_model(g, rep.L0, s=3, s_p=4)
        eye_out = np.eye(io.output_len)
        eye_in = np.eye(io.past_len + io.window_len)
        assert np.max(np.abs(io.K_io @ io.I_io)) <= 1e-10
        assert np.max(np.abs(io.K_io @ io.K_io.T - eye_out)) <= 1e-10
        assert np.max(np.abs(io.I_io.T @ io.I_io - eye_in)) <= 1e-10

    def test_invalid_gain(self, plant3):
        with pytest.raises(StructuralError):
            build_io_model(plant3, 100.0 * np.ones((3, 1)), s=3, s_p=3)

    def test_bad_horizons(self, plant3):
        with pytest.raises(DimensionError):
            build_io_model(plant3, deadbeat_observer_gain(plant3), s=0, s_p=3)


class TestParityResidual:
    def test_exact_data(self, plant3, io3):
        rng = np.random.default_rng(6)
        u = SignalWindow(rng.standard_normal((50, 1)), 0)
        y = simulate(plant3, u)
        for k, z_p, u_s, y_s in sliding_windows(u, y, io3):
            _, nrm = parity_residual(io3, z_p, u_s, y_s)
            assert nrm <= 1e-10

    def test_unit_perturbation_maps_through_whitener(self, io3):
        rng = np.random.default_rng(7)
        z_p = rng.standard_normal(io3.past_len)
        u_s = rng.standard_normal(io3.window_len)
        y_s = io3.theta @ np.concatenate([z_p, u_s])
        e = np.zeros(io3.output_len)
        e[1] = 1.0
        r_s, _ = parity_residual(io3, z_p, u_s, y_s + e)
        assert np.allclose(r_s, io3.sigma_inv_half @ e, atol=1e-12)

    def test_full_projection_route_matches(self, io3):
        rng = np.random.default_rng(8)
        z_p = rng.standard_normal(io3.past_len)
        u_s = rng.standard_normal(io3.window_len)
        y_s = rng.standard_normal(io3.output_len)
        stacked = np.concatenate([z_p, u_s, y_s])
        r_io = io3.K_io.T @ (io3.K_io @ stacked)
        r_s, nrm = parity_residual(io3, z_p, u_s, y_s)
        assert abs(np.linalg.norm(r_io) - nrm) <= 1e-10
        # finite-dimensional split is exact
        proj = stacked - r_io
        assert abs(stacked @ stacked - (proj @ proj + r_io @ r_io)) <= 1e-10

    def test_gain_invariance_on_exact_data(self, plant3):
        rep = normalized_gains(plant3)
        io_a = build_io_model(plant3, deadbeat_observer_gain(plant3), s=3, s_p=3)
        io_b = build_io_model(plant3, rep.L0, s=3, s_p=60)
        rng = np.random.default_rng(9)
        u = SignalWindow(rng.standard_normal((200, 1)), 0)
        y = simulate(plant3, u)
        za, ua, ya = stack_past(u, y, 120, 3, 3)
        zb, ub, yb = stack_past(u, y, 120, 3, 60)
        _, na = parity_residual(io_a, za, ua, ya)
        _, nb = parity_residual(io_b, zb, ub, yb)
        assert na <= 1e-8 and nb <= 1e-8

    def test_dimension_mismatch(self, io3):
        with pytest.raises(DimensionError):
            parity_residual(io3, np.zeros(3), np.zeros(4), np.zeros(4))


class TestIdentify:
    def test_noise_free_recovery(self, plant3, io3):
        rng = np.random.default_rng(10)
        u = SignalWindow(rng.standard_normal((2000, 1)), 0)
        y = simulate(plant3, u)
        est = identify_io_model(u, y, s=3, s_p=3)
        rel = np.linalg.norm(est.theta - io3.theta) / np.linalg.norm(io3.theta)
        assert rel <= 1e-6
        assert est.regression_rms <= 1e-9

    def test_noisy_outputs_scale_rms(self, plant3):
        rng = np.random.default_rng(11)
        u = SignalWindow(rng.standard_normal((4000, 1)), 0)
        y = simulate(plant3, u)
        sigma = 0.01
        y_n = SignalWindow(y.samples + sigma * rng.standard_normal(y.samples.shape), 0)
        est = identify_io_model(u, y_n, s=3, s_p=3)
        assert 0.3 * sigma <= est.regression_rms <= 5.0 * sigma
        # detection still works on the identified model: a noise-level
        # uncertainty radius plus a bias well above the noise floor
        z_p = rng.standard_normal(est.past_len)
        u_s = rng.standard_normal(est.window_len)
        y_s = est.theta @ np.concatenate([z_p, u_s]) + 20 * sigma
        _, nrm = parity_residual(est, z_p, u_s, y_s)
        rep = io_threshold(0.02, z_p, u_s, y_s, nrm)
        assert rep.faulty

    def test_constant_input_rejected(self, plant3):
        u = SignalWindow(np.ones((2000, 1)), 0)
        y = simulate(plant3, u)
        with pytest.raises(IdentificationError):
            identify_io_model(u, y, s=3, s_p=3)

    def test_short_log_rejected(self, plant3):
        u = SignalWindow(np.ones((10, 1)), 0)
        with pytest.raises(IdentificationError):
            identify_io_model(u, u, s=3, s_p=3)

    def test_ridge_accepts_deficient_data(self, plant3):
        u = SignalWindow(np.ones((2000, 1)), 0)
        y = simulate(plant3, u)
        est = identify_io_model(u, y, s=3, s_p=3, ridge=1e-6)
        assert np.all(np.isfinite(est.theta))


class TestThreshold:
    def test_zero_residual_maximal(self, io3):
        rng = np.random.default_rng(12)
        z_p = rng.standard_normal(io3.past_len)
        u_s = rng.standard_normal(io3.window_len)
        y_s = io3.theta @ np.concatenate([z_p, u_s])
        rep = io_threshold(0.2, z_p, u_s, y_s, 0.0)
        stacked = np.sqrt(z_p @ z_p + u_s @ u_s + y_s @ y_s)
        assert np.isclose(rep.J_th, 0.2 / np.sqrt(0.96) * stacked)

    @pytest.mark.parametrize("seed", list(range(13, 33)))
    def test_no_false_alarm_under_matrix_uncertainty(self, io3, seed):
        rng = np.random.default_rng(seed)
        dx, du = io_matrix_uncertainty(rng, io3, rng.uniform(0.02, 0.2))
        z_p = rng.standard_normal(io3.past_len)
        u_s = rng.standard_normal(io3.window_len)
        y_s = (io3.Gamma_s @ io3.L_p + dx) @ z_p + (io3.H_us + du) @ u_s
        _, nrm = parity_residual(io3, z_p, u_s, y_s)
        assert not io_threshold(0.2, z_p, u_s, y_s, nrm).faulty

    def test_sensor_bias_detected(self, io3):
        rng = np.random.default_rng(40)
        z_p = rng.standard_normal(io3.past_len)
        u_s = rng.standard_normal(io3.window_len)
        y_s = io3.theta @ np.concatenate([z_p, u_s]) + 3.0
        _, nrm = parity_residual(io3, z_p, u_s, y_s)
        assert io_threshold(0.2, z_p, u_s, y_s, nrm).faulty

    def test_json_round_trip(self, io3):
        from projfdi.parity import IOKernelModel
        io2 = IOKernelModel.from_json(io3.to_json())
        assert np.allclose(io2.theta, io3.theta)
        assert io2.s == io3.s and io2.s_p == io3.s_p
