"""State-space core: simulation, stability tests, frequency response, IO."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projfdi.exceptions import DimensionError, OverflowGuardError
from projfdi.signals import SignalWindow, dot, stack_windows
from projfdi.statespace import (StateSpaceModel, adjoint_response,
                                constant_model, freq_response, inverse,
                                is_schur, parallel, series, simulate,
                                transpose)

from conftest import make_random_plant


class TestSimulate:
    def test_zero_input_zero_state(self, s1):
        u = SignalWindow(np.zeros((20, 1)), 0)
        y = simulate(s1, u)
        assert np.all(y.samples == 0.0)

    def test_static_gain(self):
        g = constant_model([[2.0]])
        y = simulate(g, SignalWindow([[1.0], [1.0]], 0))
        assert np.allclose(y.samples, [[2.0], [2.0]])

    def test_impulse_matches_direct_recursion(self, s1):
        u = np.zeros((12, 1))
        u[0, 0] = 1.0
        y = simulate(s1, SignalWindow(u, 0))
        # independent oracle: run the recursion by hand
        x = 0.0
        expected = []
        for k in range(12):
            expected.append(x)
            x = 0.5 * x + u[k, 0]
        assert np.allclose(y.samples[:, 0], expected, atol=1e-15)
        assert y.samples[0, 0] == 0.0
        assert np.allclose(y.samples[1:, 0], 0.5 ** np.arange(11))

    def test_window_alignment(self, s1):
        u = SignalWindow(np.ones((5, 1)), start_index=-3)
        y = simulate(s1, u)
        assert y.start_index == -3 and y.length == 5

    def test_dimension_mismatch(self, s1):
        with pytest.raises(DimensionError):
            simulate(s1, SignalWindow(np.ones((5, 2)), 0))
        with pytest.raises(DimensionError):
            simulate(s1, SignalWindow(np.ones((5, 1)), 0), x0=[1.0, 2.0])

    def test_overflow_guard(self):
        g = StateSpaceModel([[1.6]], [[1.0]], [[1.0]], [[0.0]])
        with pytest.raises(OverflowGuardError):
            simulate(g, SignalWindow(np.ones((500, 1)), 0))

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, a, b):
        g = make_random_plant(5, n=3, p=2, m=2)
        rng = np.random.default_rng(6)
        u1 = rng.standard_normal((30, 2))
        u2 = rng.standard_normal((30, 2))
        y1 = simulate(g, SignalWindow(u1, 0)).samples
        y2 = simulate(g, SignalWindow(u2, 0)).samples
        y12 = simulate(g, SignalWindow(a * u1 + b * u2, 0)).samples
        assert np.allclose(y12, a * y1 + b * y2, atol=1e-12 * (1 + abs(a) + abs(b)))


class TestSchur:
    def test_scalar_stable(self):
        assert is_schur(np.array([[0.5]]))

    def test_unit_eigenvalue(self):
        assert not is_schur(np.array([[1.0]]))

    def test_scaled_rotation(self):
        c, s = np.cos(0.7), np.sin(0.7)
        M = 0.99 * np.array([[c, -s], [s, c]])
        assert is_schur(M)
        assert not is_schur(M, margin=0.02)


class TestFrequencyResponse:
    def test_static(self):
        g = constant_model([[3.0, 1.0]])
        assert np.allclose(freq_response(g, 1.234), [[3.0, 1.0]])

    def test_s1_values(self, s1):
        assert np.allclose(freq_response(s1, 0.0), 2.0)
        assert np.allclose(freq_response(s1, np.pi), -2.0 / 3.0)

    def test_conjugate_symmetry(self):
        g = make_random_plant(7)
        th = 1.1
        assert np.allclose(freq_response(g, -th), np.conj(freq_response(g, th)))

    def test_adjoint_static(self):
        g = constant_model([[1.0, 2.0], [3.0, 4.0]])
        assert np.allclose(adjoint_response(g, 0.3), g.D.T)

    def test_adjoint_is_conj_transpose_on_circle(self):
        g = make_random_plant(8)
        for th in (0.0, 0.4, 2.2):
            assert np.allclose(adjoint_response(g, th),
                               freq_response(g, th).conj().T, atol=1e-12)

    def test_adjoint_s1_quarter_turn(self, s1):
        val = adjoint_response(s1, np.pi / 2)[0, 0]
        assert np.allclose(val, np.conj(1.0 / (np.exp(1j * np.pi / 2) - 0.5)))


class TestAlgebra:
    def test_series_matches_pointwise_product(self):
        g1 = make_random_plant(10, p=2, m=3)
        g2 = make_random_plant(11, p=3, m=2)
        gc = series(g2, g1)
        for th in (0.0, 0.9, 2.5):
            assert np.allclose(freq_response(gc, th),
                               freq_response(g2, th) @ freq_response(g1, th))

    def test_parallel_and_transpose(self):
        g1 = make_random_plant(12, p=2, m=2)
        g2 = make_random_plant(13, p=2, m=2)
        gp = parallel(g1, g2, sign=-1.0)
        gt = transpose(g1)
        for th in (0.3, 1.7):
            assert np.allclose(freq_response(gp, th),
                               freq_response(g1, th) - freq_response(g2, th))
            assert np.allclose(freq_response(gt, th), freq_response(g1, th).T)

    def test_inverse(self):
        g = make_random_plant(14, p=2, m=2, d_scale=1.5)
        gi = inverse(g)
        for th in (0.2, 1.1):
            assert np.allclose(freq_response(gi, th),
                               np.linalg.inv(freq_response(g, th)))


class TestSerialization:
    def test_model_json_round_trip(self):
        g = make_random_plant(15)
        g2 = StateSpaceModel.loads(g.dumps())
        assert np.array_equal(g.A, g2.A) and np.array_equal(g.B, g2.B)
        assert np.array_equal(g.C, g2.C) and np.array_equal(g.D, g2.D)

    def test_static_model_round_trip(self):
        g = constant_model([[2.0]])
        g2 = StateSpaceModel.loads(g.dumps())
        assert g2.n == 0 and np.array_equal(g2.D, g.D)

    def test_signal_csv_round_trip(self):
        w = SignalWindow(np.random.default_rng(0).standard_normal((7, 3)), -2)
        w2 = SignalWindow.from_csv(w.to_csv())
        assert w2.start_index == -2
        assert np.array_equal(w.samples, w2.samples)

    def test_signal_csv_header(self):
        w = SignalWindow(np.zeros((2, 2)), 0)
        assert w.to_csv().splitlines()[0] == "k,ch0,ch1"


class TestSignalWindow:
    def test_zero_extension(self):
        w = SignalWindow([[1.0], [2.0]], 5)
        assert np.array_equal(w.at(5), [1.0])
        assert np.array_equal(w.at(4), [0.0])
        assert np.array_equal(w.at(7), [0.0])

    def test_restrict_and_energy(self):
        w = SignalWindow([[1.0], [2.0], [3.0]], 0)
        r = w.restrict(-1, 1)
        assert r.start_index == -1 and r.length == 3
        assert np.allclose(r.samples[:, 0], [0.0, 1.0, 2.0])
        assert w.energy() == 14.0

    def test_stack_and_dot(self):
        a = SignalWindow([[1.0], [0.0]], 0)
        b = SignalWindow([[0.0], [2.0]], 0)
        s = stack_windows(a, b)
        assert s.channel_count == 2
        assert dot(a, a) == 1.0 and dot(a, b) == 0.0
