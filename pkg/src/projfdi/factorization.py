"""Coprime factorizations, Bezout complements and normalized kernel/image factors.

Left factors share the observer recursion with state matrix A - L C; right
factors share the state-feedback recursion with A + B F.  Normalized gains
come from the two stabilizing Riccati solutions; the resulting stable kernel
representation K_G = [-Nhat0, Mhat0] satisfies K_G K_G~ = I and the stable
image representation I_G = [M0; N0] satisfies I_G~ I_G = I on the circle.
Free orthogonal factors in the normalized gains are fixed to identity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DimensionError, NumericError, StructuralError
from .riccati import control_gain, dare_stabilizing, filter_gain, solve_dare
from .signals import FrequencyGrid
from .statespace import (StateSpaceModel, freq_response_grid, is_schur,
                         schur_margin)

__all__ = [
    "CoprimeFactorization", "BezoutSet", "NormalizedRepresentation",
    "make_coprime", "bezout_complements", "normalized_gains", "verify_bezout",
    "inv_sqrt_psd", "sqrt_psd", "spectral_factor", "grid_identity_deviation",
]

VERIFY_GRID = 512
IDENTITY_TOL = 1e-8
EIG_FLOOR = 1e-14


def sqrt_psd(M: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition with a small floor."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] == 0:
        return M.copy()
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w = np.maximum(w, EIG_FLOOR)
    return (V * np.sqrt(w)) @ V.T


def inv_sqrt_psd(M: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root (.)^{-1/2} with eigenvalue floor."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] == 0:
        return M.copy()
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w = np.maximum(w, EIG_FLOOR)
    return (V / np.sqrt(w)) @ V.T


@dataclass(frozen=True, eq=False)
class CoprimeFactorization:
    """Left factors (Mhat, Nhat) with gains (L, W) or right (M, N) with (F, V)."""

    side: str
    denominator: StateSpaceModel   # Mhat (left) or M (right)
    numerator: StateSpaceModel     # Nhat (left) or N (right)
    gain: np.ndarray               # L (left) or F (right)
    weight: np.ndarray             # W (left) or V (right)

    @property
    def factors(self):
        return self.denominator, self.numerator

    @cached_property
    def combined(self) -> StateSpaceModel:
        """Single-realization map: left gives [-Nhat, Mhat] acting on [u; y];
        right gives [M; N] acting on the latent signal."""
        if self.side == "left":
            # observer form: xhat+ = (A-LC) xhat + (B-LD) u + L y,
            #                r    = W (y - C xhat - D u)
            Mh, Nh = self.denominator, self.numerator
            A = Mh.A
            Bu = Nh.B
            By = -Mh.B
            W = self.weight
            C = -Mh.C
            Du = -Nh.D
            Dy = Mh.D
            return StateSpaceModel(A, np.hstack([Bu, By]), C, np.hstack([Du, Dy]))
        M, N = self.denominator, self.numerator
        return StateSpaceModel(M.A, M.B, np.vstack([M.C, N.C]), np.vstack([M.D, N.D]))


def make_coprime(model: StateSpaceModel, gain: np.ndarray, weight: np.ndarray,
                 side: str) -> CoprimeFactorization:
    """Factor realizations for user-supplied gains.

    side="left" expects gain L (n x m) with A - L C Schur and invertible W;
    side="right" expects gain F (p x n) with A + B F Schur and invertible V.
    """
    A, B, C, D = model.A, model.B, model.C, model.D
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    weight = np.atleast_2d(np.asarray(weight, dtype=float))
    if np.linalg.matrix_rank(weight) < weight.shape[0]:
        raise DimensionError("factor weight must be invertible")
    if side == "left":
        L, W = gain.reshape(model.n, model.m), weight
        AL = A - L @ C
        if model.n and not is_schur(AL):
            raise StructuralError("A - L C is not Schur; invalid gain")
        Mhat = StateSpaceModel(AL, -L, W @ C, W)
        Nhat = StateSpaceModel(AL, B - L @ D, W @ C, W @ D)
        return CoprimeFactorization("left", Mhat, Nhat, L, W)
    if side == "right":
        F, V = gain.reshape(model.p, model.n), weight
        AF = A + B @ F
        if model.n and not is_schur(AF):
            raise StructuralError("A + B F is not Schur; invalid gain")
        M = StateSpaceModel(AF, B @ V, F, V)
        N = StateSpaceModel(AF, B @ V, C + D @ F, D @ V)
        return CoprimeFactorization("right", M, N, F, V)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


@dataclass(frozen=True, eq=False)
class BezoutSet:
    """Complements (Xhat, Yhat, X, Y) certifying coprimeness of a factor pair."""

    Xhat: StateSpaceModel
    Yhat: StateSpaceModel
    X: StateSpaceModel
    Y: StateSpaceModel


def bezout_complements(model: StateSpaceModel, F: np.ndarray, L: np.ndarray,
                       V: np.ndarray, W: np.ndarray) -> BezoutSet:
    """Complement realizations for the double Bezout identity."""
    A, B, C, D = model.A, model.B, model.C, model.D
    F = np.asarray(F, dtype=float).reshape(model.p, model.n)
    L = np.asarray(L, dtype=float).reshape(model.n, model.m)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    try:
        Winv = np.linalg.inv(W)
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise DimensionError("W and V must be invertible") from exc
    AF = A + B @ F
    AL = A - L @ C
    # W^{-1} and V^{-1} placements make the block product exactly identity
    # for arbitrary invertible weights, not just W = V = I.
    Xhat = StateSpaceModel(AF, L @ Winv, C + D @ F, Winv)
    Yhat = StateSpaceModel(AF, -L @ Winv, F, np.zeros((model.p, model.m)))
    X = StateSpaceModel(AL, -(B - L @ D), Vinv @ F, Vinv)
    Y = StateSpaceModel(AL, -L, Vinv @ F, np.zeros((model.p, model.m)))
    return BezoutSet(Xhat, Yhat, X, Y)


@dataclass(frozen=True, eq=False)
class NormalizedRepresentation:
    """Normalized kernel/image factor set with Riccati solutions and gains."""

    plant: StateSpaceModel
    skr: CoprimeFactorization
    sir: CoprimeFactorization
    riccati_P: np.ndarray
    riccati_Q: np.ndarray

    @property
    def L0(self) -> np.ndarray:
        return self.skr.gain

    @property
    def W0(self) -> np.ndarray:
        return self.skr.weight

    @property
    def F0(self) -> np.ndarray:
        return self.sir.gain

    @property
    def V0(self) -> np.ndarray:
        return self.sir.weight

    @cached_property
    def kernel_model(self) -> StateSpaceModel:
        """K_G = [-Nhat0, Mhat0] as one realization, input [u; y]."""
        return self.skr.combined

    @cached_property
    def image_model(self) -> StateSpaceModel:
        """I_G = [M0; N0] as one realization, output [u; y]."""
        return self.sir.combined

    @property
    def observer_margin(self) -> float:
        return schur_margin(self.skr.denominator.A)

    @property
    def feedback_margin(self) -> float:
        return schur_margin(self.sir.denominator.A)

    def to_json(self) -> dict:
        return {
            "plant": self.plant.to_json(),
            "L0": self.L0.tolist(),
            "W0": self.W0.tolist(),
            "F0": self.F0.tolist(),
            "V0": self.V0.tolist(),
            "riccati_P": self.riccati_P.tolist(),
            "riccati_Q": self.riccati_Q.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NormalizedRepresentation":
        plant = StateSpaceModel.from_json(obj["plant"])
        L0 = np.asarray(obj["L0"], dtype=float).reshape(plant.n, plant.m)
        W0 = np.atleast_2d(np.asarray(obj["W0"], dtype=float))
        F0 = np.asarray(obj["F0"], dtype=float).reshape(plant.p, plant.n)
        V0 = np.atleast_2d(np.asarray(obj["V0"], dtype=float))
        skr = make_coprime(plant, L0, W0, side="left")
        sir = make_coprime(plant, F0, V0, side="right")
        P = np.asarray(obj["riccati_P"], dtype=float).reshape(plant.n, plant.n)
        Q = np.asarray(obj["riccati_Q"], dtype=float).reshape(plant.n, plant.n)
        return cls(plant, skr, sir, P, Q)

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "NormalizedRepresentation":
        return cls.from_json(json.loads(text))


def normalized_gains(model: StateSpaceModel) -> NormalizedRepresentation:
    """Normalized SKR and SIR of the plant from the stabilizing Riccati pair."""
    P = dare_stabilizing(model, "filter")
    Q = dare_stabilizing(model, "control")
    D = model.D
    L0 = filter_gain(model, P)
    W0 = inv_sqrt_psd(np.eye(model.m) + D @ D.T + model.C @ P @ model.C.T)
    F0 = control_gain(model, Q)
    V0 = inv_sqrt_psd(np.eye(model.p) + D.T @ D + model.B.T @ Q @ model.B)
    skr = make_coprime(model, L0, W0, side="left")
    sir = make_coprime(model, F0, V0, side="right")
    return NormalizedRepresentation(model, skr, sir, P, Q)


# ---------------------------------------------------------------------------
# grid verification helpers
# ---------------------------------------------------------------------------

def _grid(grid) -> np.ndarray:
    if grid is None:
        grid = FrequencyGrid(VERIFY_GRID)
    if isinstance(grid, int):
        grid = FrequencyGrid(grid)
    return grid.points if isinstance(grid, FrequencyGrid) else np.asarray(grid, dtype=float)


def grid_identity_deviation(values: np.ndarray) -> float:
    """Max Frobenius deviation from identity over a batch of matrices."""
    eye = np.eye(values.shape[1])
    return float(np.max(np.linalg.norm(values - eye[None, :, :], axis=(1, 2))))


def verify_bezout(bez: BezoutSet, cf_left: CoprimeFactorization,
                  cf_right: CoprimeFactorization, grid=None) -> float:
    """Max grid deviation of the double Bezout block product from identity."""
    if cf_left.side != "left" or cf_right.side != "right":
        raise DimensionError("verify_bezout expects a (left, right) factor pair")
    thetas = _grid(grid)
    Mh = freq_response_grid(cf_left.denominator, thetas)
    Nh = freq_response_grid(cf_left.numerator, thetas)
    M = freq_response_grid(cf_right.denominator, thetas)
    N = freq_response_grid(cf_right.numerator, thetas)
    Xh = freq_response_grid(bez.Xhat, thetas)
    Yh = freq_response_grid(bez.Yhat, thetas)
    X = freq_response_grid(bez.X, thetas)
    Y = freq_response_grid(bez.Y, thetas)
    top = np.concatenate([np.concatenate([X, Y], axis=2),
                          np.concatenate([-Nh, Mh], axis=2)], axis=1)
    bottom = np.concatenate([np.concatenate([M, -Yh], axis=2),
                             np.concatenate([N, Xh], axis=2)], axis=1)
    return grid_identity_deviation(top @ bottom)


def skr_normalization_deviation(rep: NormalizedRepresentation, grid=None) -> float:
    """Max grid deviation of K_G K_G~ from identity."""
    thetas = _grid(grid)
    K = freq_response_grid(rep.kernel_model, thetas)
    return grid_identity_deviation(K @ K.conj().transpose(0, 2, 1))


def sir_normalization_deviation(rep: NormalizedRepresentation, grid=None) -> float:
    """Max grid deviation of I_G~ I_G from identity."""
    thetas = _grid(grid)
    I = freq_response_grid(rep.image_model, thetas)
    return grid_identity_deviation(I.conj().transpose(0, 2, 1) @ I)


def unitary_completion_deviation(rep: NormalizedRepresentation, grid=None) -> float:
    """Max grid deviation of K_G~ K_G + I_G I_G~ from identity (full square)."""
    thetas = _grid(grid)
    K = freq_response_grid(rep.kernel_model, thetas)
    I = freq_response_grid(rep.image_model, thetas)
    total = K.conj().transpose(0, 2, 1) @ K + I @ I.conj().transpose(0, 2, 1)
    return grid_identity_deviation(total)


def factorization_identity_deviation(cf: CoprimeFactorization,
                                     model: StateSpaceModel,
                                     thetas: np.ndarray) -> float:
    """Max deviation of Mhat^{-1} Nhat (or N M^{-1}) from G on the angles."""
    G = freq_response_grid(model, thetas)
    den = freq_response_grid(cf.denominator, thetas)
    num = freq_response_grid(cf.numerator, thetas)
    dev = 0.0
    for k in range(thetas.size):
        try:
            if cf.side == "left":
                val = np.linalg.solve(den[k], num[k])
            else:
                val = num[k] @ np.linalg.inv(den[k])
        except np.linalg.LinAlgError as exc:
            raise NumericError("factor denominator singular on the circle") from exc
        dev = max(dev, float(np.linalg.norm(val - G[k])))
    return dev


# ---------------------------------------------------------------------------
# output spectral factorization (used by the feedback-loop schemes)
# ---------------------------------------------------------------------------

def spectral_factor(model: StateSpaceModel) -> StateSpaceModel:
    """Stable, stably invertible Lambda with Lambda~ Lambda = G~ G.

    Requires G stable, square-summable, and G~G positive definite on the
    circle.  Built from the stabilizing solution of the output spectral
    factorization Riccati equation.
    """
    A, B, C, D = model.A, model.B, model.C, model.D
    X = solve_dare(A, B, C.T @ C, D.T @ D, C.T @ D)
    Rs = D.T @ D + B.T @ X @ B
    Fs = -np.linalg.solve(Rs, B.T @ X @ A + D.T @ C)
    Ld = sqrt_psd(Rs)
    lam = StateSpaceModel(A, B, -Ld @ Fs, Ld)
    if model.n and not is_schur(A + B @ Fs):
        raise NumericError("spectral factor is not outer (A + B Fs not Schur)")
    return lam
