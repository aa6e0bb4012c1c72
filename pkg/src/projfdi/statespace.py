"""Discrete-time state-space models and realization algebra.

A :class:`StateSpaceModel` is the quadruple (A, B, C, D) of the recursion

    x(k+1) = A x(k) + B u(k)
    y(k)   = C x(k) + D u(k)

with n states, p inputs and m outputs.  Models are immutable; every
combination helper returns a fresh model.  n = 0 (static gain) is supported
throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, NumericError, OverflowGuardError

__all__ = [
    "StateSpaceModel", "is_schur", "spectral_radius", "schur_margin",
    "series", "parallel", "stack_outputs", "stack_inputs", "transpose",
    "inverse", "constant_model", "freq_response", "adjoint_response",
    "freq_response_grid", "simulate", "simulate_from", "impulse_response",
    "observability_gramian", "controllability_gramian",
    "observability_matrix", "controllability_matrix",
]

OVERFLOW_GUARD = 1e30


def _as_matrix(value, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if rows is not None and cols is not None and arr.size == 0:
        arr = arr.reshape(rows, cols)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Immutable real state-space quadruple (A, B, C, D)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        D = _as_matrix(self.D)
        m, p = D.shape
        B = _as_matrix(self.B, n, p)
        C = _as_matrix(self.C, m, n)
        if B.shape != (n, p):
            raise DimensionError(f"B must be {n}x{p}, got {B.shape}")
        if C.shape != (m, n):
            raise DimensionError(f"C must be {m}x{n}, got {C.shape}")
        for name, mat in (("A", A), ("B", B), ("C", C), ("D", D)):
            if mat.size and not np.all(np.isfinite(mat)):
                raise DimensionError(f"{name} contains non-finite entries")
        for mat in (A, B, C, D):
            mat.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.D.shape[1]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def is_static(self) -> bool:
        return self.n == 0

    def __repr__(self):
        return f"StateSpaceModel(n={self.n}, p={self.p}, m={self.m})"

    def to_json(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StateSpaceModel":
        return cls(np.array(obj["A"], dtype=float).reshape(len(obj["A"]), -1) if obj["A"] else np.zeros((0, 0)),
                   np.asarray(obj["B"], dtype=float) if np.size(obj["B"]) else np.zeros((0, len(obj["D"][0]) if obj["D"] else 0)),
                   np.asarray(obj["C"], dtype=float) if np.size(obj["C"]) else np.zeros((len(obj["D"]), 0)),
                   np.asarray(obj["D"], dtype=float))

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "StateSpaceModel":
        return cls.from_json(json.loads(text))


def spectral_radius(M: np.ndarray) -> float:
    M = _as_matrix(M)
    if M.shape[0] == 0:
        return 0.0
    try:
        eigs = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(np.abs(eigs)))


def is_schur(M: np.ndarray, margin: float = 0.0) -> bool:
    """True iff the spectral radius of M is below 1 - margin."""
    return spectral_radius(M) < 1.0 - margin


def schur_margin(M: np.ndarray) -> float:
    """Distance of the spectral radius from the unit circle (1 - rho)."""
    return 1.0 - spectral_radius(M)


# ---------------------------------------------------------------------------
# realization algebra
# ---------------------------------------------------------------------------

def series(second: StateSpaceModel, first: StateSpaceModel) -> StateSpaceModel:
    """Cascade second∘first: output = second(first(input))."""
    if first.m != second.p:
        raise DimensionError(f"series: inner dimensions differ ({first.m} vs {second.p})")
    n1, n2 = first.n, second.n
    A = np.block([
        [first.A, np.zeros((n1, n2))],
        [second.B @ first.C, second.A],
    ]) if n1 + n2 else np.zeros((0, 0))
    B = np.vstack([first.B, second.B @ first.D]) if n1 + n2 else np.zeros((0, first.p))
    C = np.hstack([second.D @ first.C, second.C]) if n1 + n2 else np.zeros((second.m, 0))
    D = second.D @ first.D
    return StateSpaceModel(A, B, C, D)


def parallel(g1: StateSpaceModel, g2: StateSpaceModel, sign: float = 1.0) -> StateSpaceModel:
    """Sum g1 + sign*g2 with a common input."""
    if (g1.p, g1.m) != (g2.p, g2.m):
        raise DimensionError("parallel: shapes differ")
    n1, n2 = g1.n, g2.n
    A = np.block([
        [g1.A, np.zeros((n1, n2))],
        [np.zeros((n2, n1)), g2.A],
    ]) if n1 + n2 else np.zeros((0, 0))
    B = np.vstack([g1.B, g2.B]) if n1 + n2 else np.zeros((0, g1.p))
    C = np.hstack([g1.C, sign * g2.C]) if n1 + n2 else np.zeros((g1.m, 0))
    return StateSpaceModel(A, B, C, g1.D + sign * g2.D)


def stack_outputs(*models: StateSpaceModel) -> StateSpaceModel:
    """Vertical stack [G1; G2; ...] sharing one input."""
    p = models[0].p
    if any(g.p != p for g in models):
        raise DimensionError("stack_outputs: input dimensions differ")
    ns = [g.n for g in models]
    ntot = sum(ns)
    A = np.zeros((ntot, ntot))
    B = np.zeros((ntot, p))
    C = np.zeros((sum(g.m for g in models), ntot))
    off_n = 0
    off_m = 0
    for g in models:
        A[off_n:off_n + g.n, off_n:off_n + g.n] = g.A
        B[off_n:off_n + g.n, :] = g.B
        C[off_m:off_m + g.m, off_n:off_n + g.n] = g.C
        off_n += g.n
        off_m += g.m
    D = np.vstack([g.D for g in models])
    return StateSpaceModel(A, B, C, D)


def stack_inputs(*models: StateSpaceModel) -> StateSpaceModel:
    """Horizontal stack [G1, G2, ...] summing into one output."""
    m = models[0].m
    if any(g.m != m for g in models):
        raise DimensionError("stack_inputs: output dimensions differ")
    ns = [g.n for g in models]
    ntot = sum(ns)
    ptot = sum(g.p for g in models)
    A = np.zeros((ntot, ntot))
    B = np.zeros((ntot, ptot))
    C = np.zeros((m, ntot))
    off_n = 0
    off_p = 0
    for g in models:
        A[off_n:off_n + g.n, off_n:off_n + g.n] = g.A
        B[off_n:off_n + g.n, off_p:off_p + g.p] = g.B
        C[:, off_n:off_n + g.n] = g.C
        off_n += g.n
        off_p += g.p
    D = np.hstack([g.D for g in models])
    return StateSpaceModel(A, B, C, D)


def transpose(g: StateSpaceModel) -> StateSpaceModel:
    """Transposed transfer matrix G(z)^T, realized as (A^T, C^T, B^T, D^T)."""
    return StateSpaceModel(g.A.T, g.C.T, g.B.T, g.D.T)


def inverse(g: StateSpaceModel) -> StateSpaceModel:
    """Inverse system; requires square invertible D."""
    if g.p != g.m:
        raise DimensionError("inverse: system must be square")
    try:
        Dinv = np.linalg.inv(g.D)
    except np.linalg.LinAlgError as exc:
        raise NumericError("inverse: feedthrough D is singular") from exc
    A = g.A - g.B @ Dinv @ g.C
    return StateSpaceModel(A, g.B @ Dinv, -Dinv @ g.C, Dinv)


def constant_model(D) -> StateSpaceModel:
    """Static system y = D u (n = 0)."""
    D = _as_matrix(D)
    m, p = D.shape
    return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, p)), np.zeros((m, 0)), D)


# ---------------------------------------------------------------------------
# frequency-domain evaluation
# ---------------------------------------------------------------------------

def freq_response(model: StateSpaceModel, theta: float) -> np.ndarray:
    """Transfer matrix value G(e^{j theta}) = C (e^{j theta} I - A)^{-1} B + D."""
    if model.is_static:
        return model.D.astype(complex)
    z = np.exp(1j * theta)
    try:
        X = np.linalg.solve(z * np.eye(model.n) - model.A, model.B)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular resolvent at theta={theta}") from exc
    return model.C @ X + model.D


def adjoint_response(model: StateSpaceModel, theta: float) -> np.ndarray:
    """Para-conjugate value G~(e^{j theta}) = G(e^{-j theta})^T."""
    return freq_response(model, -theta).T


def freq_response_grid(model: StateSpaceModel, thetas: np.ndarray) -> np.ndarray:
    """Batched G(e^{j theta_k}); returns array of shape (len(thetas), m, p)."""
    thetas = np.asarray(thetas, dtype=float)
    if model.is_static:
        return np.broadcast_to(model.D.astype(complex), (thetas.size, model.m, model.p)).copy()
    z = np.exp(1j * thetas)
    eye = np.eye(model.n)
    # batched resolvent solve: (zI - A) X = B for every grid angle
    lhs = z[:, None, None] * eye[None, :, :] - model.A[None, :, :]
    rhs = np.broadcast_to(model.B.astype(complex), (thetas.size, model.n, model.p))
    try:
        X = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular resolvent on evaluation grid") from exc
    return model.C[None, :, :] @ X + model.D[None, :, :]


# ---------------------------------------------------------------------------
# time-domain simulation
# ---------------------------------------------------------------------------

def _simulate_array(model: StateSpaceModel, u: np.ndarray, x0: np.ndarray,
                    return_final_state: bool = False):
    n = model.n
    length = u.shape[0]
    y = np.empty((length, model.m))
    x = x0.astype(float).copy()
    A, B, C, D = model.A, model.B, model.C, model.D
    for k in range(length):
        y[k] = C @ x + D @ u[k]
        x = A @ x + B @ u[k]
        if n and np.max(np.abs(x)) > OVERFLOW_GUARD:
            raise OverflowGuardError(f"state exceeded overflow guard at step {k}")
    if return_final_state:
        return y, x
    return y


def simulate_from(model: StateSpaceModel, u: np.ndarray, x0=None):
    """Simulate on a raw (length, p) input array; returns (y, final_state)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != model.p:
        raise DimensionError(f"input has {u.shape[1]} channels, model expects {model.p}")
    if x0 is None:
        x0 = np.zeros(model.n)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != model.n:
        raise DimensionError(f"x0 has length {x0.shape[0]}, model has n={model.n}")
    return _simulate_array(model, u, x0, return_final_state=True)


def simulate(model: StateSpaceModel, window, x0=None):
    """Simulate a SignalWindow through the model; output aligned with input."""
    from .signals import SignalWindow

    if window.channel_count != model.p:
        raise DimensionError(
            f"input window has {window.channel_count} channels, model expects {model.p}")
    y, _ = simulate_from(model, window.samples, x0)
    return SignalWindow(y, start_index=window.start_index)


def impulse_response(model: StateSpaceModel, length: int) -> np.ndarray:
    """Markov parameters h_0..h_{length-1}, shape (length, m, p)."""
    h = np.zeros((length, model.m, model.p))
    h[0] = model.D
    if model.n:
        X = model.B.copy()
        for k in range(1, length):
            h[k] = model.C @ X
            X = model.A @ X
    return h


# ---------------------------------------------------------------------------
# Gramians and structural matrices
# ---------------------------------------------------------------------------

def observability_gramian(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solution of Go = A^T Go A + C^T C for Schur A (exact tail energies)."""
    from scipy.linalg import solve_discrete_lyapunov

    A = _as_matrix(A)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    Go = solve_discrete_lyapunov(A.T, C.T @ C)
    return 0.5 * (Go + Go.T)


def controllability_gramian(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solution of Gc = A Gc A^T + B B^T for Schur A."""
    from scipy.linalg import solve_discrete_lyapunov

    A = _as_matrix(A)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    Gc = solve_discrete_lyapunov(A, B @ B.T)
    return 0.5 * (Gc + Gc.T)


def observability_matrix(model: StateSpaceModel) -> np.ndarray:
    rows = [model.C]
    X = model.C
    for _ in range(model.n - 1):
        X = X @ model.A
        rows.append(X)
    return np.vstack(rows) if rows else np.zeros((0, model.n))


def controllability_matrix(model: StateSpaceModel) -> np.ndarray:
    cols = [model.B]
    X = model.B
    for _ in range(model.n - 1):
        X = model.A @ X
        cols.append(X)
    return np.hstack(cols) if cols else np.zeros((model.n, 0))
