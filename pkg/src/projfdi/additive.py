"""Unified residual generation for additive disturbances and faults.

For a plant with disturbance channels (E_d, F_d) the co-inner factor built
from the disturbance Riccati equation maps the disturbance to the residual
isometrically on its reachable subspace.  A stable post-filter turns any
observer residual into that optimal one; its threshold is simply the
disturbance energy bound, strictly sharper than the conservative
||N_d||_inf-scaled bound whenever that norm exceeds one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, StructuralError
from .factorization import inv_sqrt_psd
from .norms import hinf_norm
from .riccati import solve_dare
from .statespace import StateSpaceModel, is_schur

__all__ = [
    "AdditiveModel", "unified_filter", "disturbance_factor", "post_filter",
    "unified_threshold", "conservative_threshold", "rank_condition_ok",
]

RANK_ANGLES = 64


@dataclass(frozen=True, eq=False)
class AdditiveModel:
    """Plant with additive disturbance and fault channels."""

    base: StateSpaceModel
    E_d: np.ndarray
    F_d: np.ndarray
    E_f: np.ndarray
    F_f: np.ndarray
    delta_d: float

    def __post_init__(self):
        n, m = self.base.n, self.base.m
        E_d = np.asarray(self.E_d, dtype=float).reshape(n, -1)
        F_d = np.asarray(self.F_d, dtype=float).reshape(m, -1)
        if E_d.shape[1] != F_d.shape[1]:
            raise DimensionError("E_d and F_d must share the disturbance width")
        E_f = np.asarray(self.E_f, dtype=float).reshape(n, -1)
        F_f = np.asarray(self.F_f, dtype=float).reshape(m, -1)
        if E_f.shape[1] != F_f.shape[1]:
            raise DimensionError("E_f and F_f must share the fault width")
        if self.delta_d < 0:
            raise DimensionError("delta_d must be nonnegative")
        object.__setattr__(self, "E_d", E_d)
        object.__setattr__(self, "F_d", F_d)
        object.__setattr__(self, "E_f", E_f)
        object.__setattr__(self, "F_f", F_f)

    @property
    def k_d(self) -> int:
        return self.E_d.shape[1]

    @property
    def k_f(self) -> int:
        return self.E_f.shape[1]

    def disturbance_model(self, L: np.ndarray, W: np.ndarray) -> StateSpaceModel:
        """N_d: disturbance-to-residual map of the (L, W) observer."""
        A, C = self.base.A, self.base.C
        L = np.asarray(L, dtype=float).reshape(self.base.n, self.base.m)
        W = np.atleast_2d(np.asarray(W, dtype=float))
        return StateSpaceModel(A - L @ C, self.E_d - L @ self.F_d,
                               W @ C, W @ self.F_d)

    def fault_model(self, L: np.ndarray, W: np.ndarray) -> StateSpaceModel:
        """N_f: fault-to-residual map of the (L, W) observer."""
        A, C = self.base.A, self.base.C
        L = np.asarray(L, dtype=float).reshape(self.base.n, self.base.m)
        W = np.atleast_2d(np.asarray(W, dtype=float))
        return StateSpaceModel(A - L @ C, self.E_f - L @ self.F_f,
                               W @ C, W @ self.F_f)

    def to_json(self) -> dict:
        return {
            "plant": self.base.to_json(),
            "E_d": self.E_d.tolist(), "F_d": self.F_d.tolist(),
            "E_f": self.E_f.tolist(), "F_f": self.F_f.tolist(),
            "delta_d": self.delta_d,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AdditiveModel":
        return cls(base=StateSpaceModel.from_json(obj["plant"]),
                   E_d=np.asarray(obj["E_d"], dtype=float),
                   F_d=np.asarray(obj["F_d"], dtype=float),
                   E_f=np.asarray(obj["E_f"], dtype=float),
                   F_f=np.asarray(obj["F_f"], dtype=float),
                   delta_d=float(obj["delta_d"]))


def rank_condition_ok(am: AdditiveModel, angles: int = RANK_ANGLES) -> bool:
    """Full row rank of [A - e^{j theta} I, E_d; C, F_d] on sampled angles."""
    n, m = am.base.n, am.base.m
    for theta in 2.0 * np.pi * np.arange(angles) / angles:
        blk = np.block([
            [am.base.A - np.exp(1j * theta) * np.eye(n), am.E_d.astype(complex)],
            [am.base.C.astype(complex), am.F_d.astype(complex)],
        ])
        s = np.linalg.svd(blk, compute_uv=False)
        if s[n + m - 1] <= 1e-9 * max(1.0, s[0]):
            return False
    return True


def unified_filter(am: AdditiveModel):
    """Disturbance-optimal observer gain pair (L_d, W_d, X).

    X solves the disturbance Riccati equation; the induced factor
    N_d0 = (A - L_d C, E_d - L_d F_d, W_d C, W_d F_d) is co-inner.
    """
    if not rank_condition_ok(am):
        raise StructuralError("disturbance channel violates the rank condition")
    A, C = am.base.A, am.base.C
    E_d, F_d = am.E_d, am.F_d
    m = am.base.m
    # dual substitution: a = A^T, b = C^T, q = E_d E_d^T, r = F_d F_d^T, s = E_d F_d^T
    X = solve_dare(A.T, C.T, E_d @ E_d.T, F_d @ F_d.T, E_d @ F_d.T)
    R = C @ X @ C.T + F_d @ F_d.T
    L_d = np.linalg.solve(R.T, (A @ X @ C.T + E_d @ F_d.T).T).T
    W_d = inv_sqrt_psd(R)
    if am.base.n and not is_schur(A - L_d @ C):
        raise StructuralError("disturbance Riccati solution is not stabilizing")
    return L_d, W_d, X


def disturbance_factor(am: AdditiveModel):
    """(N_d0, L_d, W_d, X): the co-inner disturbance-to-residual factor."""
    L_d, W_d, X = unified_filter(am)
    return am.disturbance_model(L_d, W_d), L_d, W_d, X


def post_filter(L: np.ndarray, W: np.ndarray, L_d: np.ndarray, W_d: np.ndarray,
                base: StateSpaceModel) -> StateSpaceModel:
    """Stable filter R with R N_d = N_d0: maps r0 to the unified residual."""
    A, C = base.A, base.C
    L = np.asarray(L, dtype=float).reshape(base.n, base.m)
    L_d = np.asarray(L_d, dtype=float).reshape(base.n, base.m)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    W_d = np.atleast_2d(np.asarray(W_d, dtype=float))
    try:
        Winv = np.linalg.inv(W)
    except np.linalg.LinAlgError as exc:
        raise DimensionError("post filter requires invertible W") from exc
    ALd = A - L_d @ C
    if base.n and not is_schur(ALd):
        raise StructuralError("A - L_d C must be Schur")
    return StateSpaceModel(ALd, (L_d - L) @ Winv, -W_d @ C, W_d @ Winv)


def unified_threshold(am: AdditiveModel) -> float:
    """Threshold of the unified residual: the disturbance energy bound itself."""
    return float(am.delta_d)


def conservative_threshold(am: AdditiveModel, L: np.ndarray, W: np.ndarray,
                           tol: float = 1e-6) -> float:
    """Observer-side bound ||N_d||_inf * delta_d for the same data."""
    return hinf_norm(am.disturbance_model(L, W), tol) * float(am.delta_d)
