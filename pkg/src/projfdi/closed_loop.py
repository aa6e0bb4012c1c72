"""Feedback loops: Youla-parameterized controllers and loop detection schemes.

Scheme A projects the loop data [u; y] onto the re-normalized open-loop
image subspace spanned by [M0; N0] Vhat0 R0, where R0 is the inverse of the
output spectral factor of Vhat0 (so the combined factor is inner).  Scheme B
stacks the filtered reference into the data and projects [vhat; u; y] onto
the image subspace of the nominal closed loop.  Both use the same threshold
constant gamma*b / sqrt(1 - (1+gamma^2) b^2) with gamma the H-infinity norm
of the stacked controller factor [U0; V0].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import (DimensionError, IllPosedLoopError, NumericError,
                         StructuralError)
from .factorization import (BezoutSet, CoprimeFactorization,
                            NormalizedRepresentation, normalized_gains,
                            spectral_factor)
from .norms import hinf_norm
from .projection import ProjectionEngine
from .signals import FrequencyGrid, SignalWindow, stack_windows
from .statespace import (StateSpaceModel, constant_model, freq_response_grid,
                         inverse, is_schur, parallel, series, stack_inputs,
                         stack_outputs)
from .thresholds import loop_threshold_factor

__all__ = [
    "ControllerRealization", "youla_controller", "closed_loop_sim",
    "ClosedLoopSIR", "closed_loop_sir_build", "SchemeADetector",
    "scheme_a_residual", "scheme_b_residual", "loop_uncertainty_blocks",
    "perturbed_plant",
]

GRID_CHECK = 64
INNER_TOL = 1e-8


def negate(g: StateSpaceModel) -> StateSpaceModel:
    return StateSpaceModel(g.A, g.B, -g.C, -g.D)


@dataclass(frozen=True, eq=False)
class ControllerRealization:
    """Stabilizing controller K = -(X0 - Q Nhat0)^{-1} (Y0 + Q Mhat0)."""

    q_param: StateSpaceModel
    rep: NormalizedRepresentation
    bez: BezoutSet
    realization: StateSpaceModel
    vhat0: StateSpaceModel   # X0 - Q Nhat0
    uhat0: StateSpaceModel   # -(Y0 + Q Mhat0)
    u0: StateSpaceModel      # -Yhat0 - M0 Q
    v0: StateSpaceModel      # Xhat0 - N0 Q

    @cached_property
    def gamma(self) -> float:
        """H-infinity norm of the stacked right controller factor [U0; V0]."""
        return hinf_norm(stack_outputs(self.u0, self.v0), 1e-6)

    @cached_property
    def vhat0_has_stable_inverse(self) -> bool:
        try:
            return bool(is_schur(inverse(self.vhat0).A)) if self.vhat0.n else True
        except NumericError:
            return False


def youla_controller(rep: NormalizedRepresentation, bez: BezoutSet,
                     Q: StateSpaceModel) -> ControllerRealization:
    """Controller for the stable parameter Q, with its coprime factor pieces."""
    if Q.n and not is_schur(Q.A):
        raise StructuralError("Youla parameter must be stable")
    if (Q.p, Q.m) != (rep.plant.m, rep.plant.p):
        raise DimensionError(
            f"Q must be {rep.plant.p}x{rep.plant.m} (u-channels x y-channels)")
    Mh, Nh = rep.skr.denominator, rep.skr.numerator
    M0, N0 = rep.sir.denominator, rep.sir.numerator
    vhat0 = parallel(bez.X, series(Q, Nh), sign=-1.0)
    y_plus_qm = parallel(bez.Y, series(Q, Mh))
    uhat0 = negate(y_plus_qm)
    u0 = negate(parallel(bez.Yhat, series(M0, Q)))
    v0 = parallel(bez.Xhat, series(N0, Q), sign=-1.0)

    # controller realization K = -(vhat0)^{-1} (Y0 + Q Mhat0)
    thetas = FrequencyGrid(GRID_CHECK).points
    fr = freq_response_grid(vhat0, thetas)
    smin = float(np.min(np.linalg.svd(fr, compute_uv=False)[:, -1]))
    if smin < 1e-9:
        raise IllPosedLoopError(
            f"X0 - Q Nhat0 is near-singular on the circle (sigma_min {smin:.2e})")
    K = negate(series(inverse(vhat0), y_plus_qm))
    return ControllerRealization(q_param=Q, rep=rep, bez=bez, realization=K,
                                 vhat0=vhat0, uhat0=uhat0, u0=u0, v0=v0)


def closed_loop_sim(plant: StateSpaceModel, ctrl: ControllerRealization,
                    v: SignalWindow, y_noise: SignalWindow | None = None):
    """Simulate u = K y + v, y = G u; returns the (u, y) windows.

    Measurement noise, when given, is added to y before it enters the
    controller and is part of the recorded output.
    """
    K = ctrl.realization
    if v.channel_count != plant.p:
        raise DimensionError("reference channel count must match plant input")
    if y_noise is not None and (y_noise.channel_count != plant.m or
                                y_noise.start_index != v.start_index or
                                y_noise.length != v.length):
        raise DimensionError("noise window must align with the reference")
    E = np.eye(plant.p) - K.D @ plant.D
    try:
        Einv = np.linalg.inv(E)
    except np.linalg.LinAlgError as exc:
        raise IllPosedLoopError("algebraic loop I - D_K D is singular") from exc
    xg = np.zeros(plant.n)
    xk = np.zeros(K.n)
    us = np.empty((v.length, plant.p))
    ys = np.empty((v.length, plant.m))
    for k in range(v.length):
        nk = y_noise.samples[k] if y_noise is not None else 0.0
        u = Einv @ (K.C @ xk + K.D @ (plant.C @ xg + nk) + v.samples[k])
        y = plant.C @ xg + plant.D @ u + nk
        us[k] = u
        ys[k] = y
        xg = plant.A @ xg + plant.B @ u
        xk = K.A @ xk + K.B @ y
        if (xg.size and np.max(np.abs(xg)) > 1e30) or (xk.size and np.max(np.abs(xk)) > 1e30):
            raise NumericError(f"closed-loop state overflow at step {k}")
    return (SignalWindow(us, v.start_index), SignalWindow(ys, v.start_index))


def settled_loop_data(plant: StateSpaceModel, ctrl: ControllerRealization,
                      v: SignalWindow, amplitude_tol: float = 1e-12,
                      max_extension: int = 20_000,
                      y_noise: SignalWindow | None = None):
    """Loop data on a window long enough for the ring-down to die out.

    The reference is zero-padded until the loop transient has decayed to
    amplitude_tol of its scale; the returned data window then represents an
    element of the loop's signal subspace up to that tolerance.
    """
    K = ctrl.realization
    E = np.eye(plant.p) - K.D @ plant.D
    Einv = np.linalg.inv(E)
    A_cl = np.block([
        [plant.A + plant.B @ Einv @ K.D @ plant.C, plant.B @ Einv @ K.C],
        [K.B @ (plant.C + plant.D @ Einv @ K.D @ plant.C), K.A + K.B @ plant.D @ Einv @ K.C],
    ]) if plant.n + K.n else np.zeros((0, 0))
    from .statespace import spectral_radius
    rho = spectral_radius(A_cl) if A_cl.size else 0.0
    if rho >= 1.0:
        raise StructuralError("closed loop is unstable; no settled window exists")
    ext = 0 if rho == 0.0 else min(max_extension,
                                   int(np.ceil(np.log(amplitude_tol) / np.log(rho))))
    v_ext = v.restrict(v.start_index, v.end_index + ext)
    noise_ext = None
    if y_noise is not None:
        noise_ext = y_noise.restrict(v.start_index, v.end_index + ext)
    return closed_loop_sim(plant, ctrl, v_ext, noise_ext)


# ---------------------------------------------------------------------------
# scheme A: open-loop image subspace with re-normalized factor
# ---------------------------------------------------------------------------

class SchemeADetector:
    """Projection detector on span([M0; N0] Vhat0 R0) for loop data [u; y]."""

    def __init__(self, ctrl: ControllerRealization, b: float):
        rep = ctrl.rep
        vhat0 = ctrl.vhat0
        thetas = FrequencyGrid(GRID_CHECK).points
        fr = freq_response_grid(vhat0, thetas)
        gram = fr.conj().transpose(0, 2, 1) @ fr
        dev = float(np.max(np.linalg.norm(
            gram - np.eye(vhat0.p)[None, :, :], axis=(1, 2))))
        if dev <= INNER_TOL:
            r0 = constant_model(np.eye(vhat0.p))
        else:
            r0 = inverse(spectral_factor(vhat0))
        inner = series(vhat0, r0)
        self.renormalizer = r0
        self.image = series(rep.image_model, inner)
        self.engine = ProjectionEngine(self.image, rep.kernel_model)
        self.gamma = ctrl.gamma
        self.b = float(b)
        self.factor = loop_threshold_factor(self.gamma, self.b)

    def evaluate(self, u: SignalWindow, y: SignalWindow):
        w = stack_windows(u, y)
        dec = self.engine.decompose(w)
        r_sq = max(dec.total_norm_sq - dec.truncation_bound, 0.0)
        r_norm = float(np.sqrt(r_sq))
        J_th = self.factor * float(np.sqrt(max(dec.data_norm_sq - r_sq, 0.0)))
        return r_norm, J_th


def scheme_a_residual(ctrl: ControllerRealization, u: SignalWindow,
                      y: SignalWindow, b: float):
    """One-shot scheme-A evaluation; returns (residual_norm, J_th)."""
    return SchemeADetector(ctrl, b).evaluate(u, y)


# ---------------------------------------------------------------------------
# scheme B: closed-loop image subspace
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClosedLoopSIR:
    """Normalized image representation of the stacked nominal loop map."""

    stacked_plant: StateSpaceModel          # maps vhat -> [u; y]
    rep_c: NormalizedRepresentation         # normalized factors of that map
    riccati_X: np.ndarray
    F_c: np.ndarray
    V_c: np.ndarray

    @property
    def sir(self) -> CoprimeFactorization:
        return self.rep_c.sir

    @cached_property
    def image_model(self) -> StateSpaceModel:
        """[M_{0,c}; N_{0,c}]: latent -> [vhat; u; y]."""
        return self.rep_c.image_model

    @cached_property
    def engine(self) -> ProjectionEngine:
        return ProjectionEngine(self.image_model, self.rep_c.kernel_model)


def closed_loop_sir_build(rep: NormalizedRepresentation,
                          prefactor: StateSpaceModel | None = None) -> ClosedLoopSIR:
    """Normalized SIR of the stacked loop map vhat -> [vhat; u; y].

    prefactor folds an extra stable factor into the map (used when the
    filtered reference is unavailable and raw v is consumed instead).
    """
    g_c = rep.image_model if prefactor is None else series(rep.image_model, prefactor)
    rep_c = normalized_gains(g_c)
    return ClosedLoopSIR(stacked_plant=g_c, rep_c=rep_c,
                         riccati_X=rep_c.riccati_Q, F_c=rep_c.F0, V_c=rep_c.V0)


def scheme_b_residual(clsir: ClosedLoopSIR, vhat: SignalWindow, u: SignalWindow,
                      y: SignalWindow, b: float, gamma: float):
    """Closed-loop projection residual and threshold; returns (r_c, J_th_c)."""
    w = stack_windows(stack_windows(vhat, u), y)
    dec = clsir.engine.decompose(w)
    r_sq = max(dec.total_norm_sq - dec.truncation_bound, 0.0)
    r_norm = float(np.sqrt(r_sq))
    factor = loop_threshold_factor(gamma, b)
    J_th = factor * float(np.sqrt(max(dec.data_norm_sq - r_sq, 0.0)))
    return r_norm, J_th


# ---------------------------------------------------------------------------
# coprime-factor uncertainty plumbing
# ---------------------------------------------------------------------------

def perturbed_plant(rep: NormalizedRepresentation, delta_m: StateSpaceModel,
                    delta_n: StateSpaceModel) -> StateSpaceModel:
    """Plant (N0 + Delta_N)(M0 + Delta_M)^{-1} as one realization."""
    M = parallel(rep.sir.denominator, delta_m)
    N = parallel(rep.sir.numerator, delta_n)
    return series(N, inverse(M))


def loop_uncertainty_blocks(ctrl: ControllerRealization,
                            delta_m: StateSpaceModel,
                            delta_n: StateSpaceModel) -> dict:
    """Derived uncertainty systems of a right-factor perturbation.

    Returns the stacked factor perturbation, the loop blocks Delta_1 and
    Delta_2, the full loop uncertainty, and Delta_2 (I + Delta_1)^{-1}.
    """
    rep = ctrl.rep
    p, m = rep.plant.p, rep.plant.m
    if (delta_m.p, delta_m.m) != (p, p) or (delta_n.p, delta_n.m) != (p, m):
        raise DimensionError("factor perturbations must be p x p and m x p")
    d_stack = stack_outputs(delta_m, delta_n)
    top_row = stack_inputs(ctrl.vhat0, negate(ctrl.uhat0))
    d1 = series(top_row, d_stack)
    d2 = series(rep.kernel_model, d_stack)
    full = stack_outputs(top_row, rep.kernel_model)
    d_ic = series(full, d_stack)
    eye_p = constant_model(np.eye(p))
    d2_feedback = series(d2, inverse(parallel(eye_p, d1)))
    return {
        "delta_stack": d_stack,
        "delta_1": d1,
        "delta_2": d2,
        "delta_ic": d_ic,
        "d2_closed": d2_feedback,
    }
