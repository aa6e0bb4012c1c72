"""Stabilizing solutions of discrete algebraic Riccati equations.

The solver targets equations of the generic form

    X = A^T X A + Q - (A^T X B + S)(R + B^T X B)^{-1} (B^T X A + S^T)

with R > 0 and Q - S R^{-1} S^T >= 0.  Solutions are computed by the
structure-preserving doubling iteration after shifting the cross term away;
a plain fixed-point iteration of the equation itself serves as fallback.
Both normalized-factor Riccati equations, spectral factorizations and the
co-inner disturbance filter reduce to this form by substitution.
"""
from __future__ import annotations

import numpy as np

from .exceptions import ConvergenceError, NumericError, StructuralError
from .statespace import StateSpaceModel, is_schur

__all__ = [
    "solve_dare", "dare_stabilizing", "dare_residual",
    "check_stabilizable", "check_detectable",
]

DOUBLING_TOL = 1e-12
MAX_ITER = 10_000
PBH_RTOL = 1e-8


def dare_residual(A, B, Q, R, S, X) -> float:
    """Frobenius norm of the Riccati equation residual at X."""
    G = R + B.T @ X @ B
    K = np.linalg.solve(G, B.T @ X @ A + S.T)
    res = A.T @ X @ A + Q - (A.T @ X @ B + S) @ K - X
    return float(np.linalg.norm(res))


def _doubling(A0: np.ndarray, G0: np.ndarray, H0: np.ndarray) -> np.ndarray:
    """SDA iteration for X = A0^T X (I + G0 X)^{-1} A0 + H0; returns H-limit."""
    n = A0.shape[0]
    Ak, Gk, Hk = A0.copy(), G0.copy(), H0.copy()
    eye = np.eye(n)
    for _ in range(200):
        M = eye + Gk @ Hk
        try:
            W1 = np.linalg.solve(M, Ak)                    # (I + G H)^{-1} A
            GW = np.linalg.solve(M, Gk @ Ak.T)             # (I + G H)^{-1} G A^T
        except np.linalg.LinAlgError as exc:
            raise NumericError("doubling step singular") from exc
        Hn = Hk + Ak.T @ Hk @ W1
        Gn = Gk + Ak @ GW
        An = Ak @ W1
        Hn = 0.5 * (Hn + Hn.T)
        Gn = 0.5 * (Gn + Gn.T)
        delta = np.linalg.norm(Hn - Hk)
        Ak, Gk, Hk = An, Gn, Hn
        if delta <= DOUBLING_TOL * (1.0 + np.linalg.norm(Hk)):
            return Hk
    raise ConvergenceError("doubling iteration did not converge",
                           residual=float(delta))


def _fixed_point(A, B, Q, R, S) -> np.ndarray:
    X = np.zeros_like(A)
    for _ in range(MAX_ITER):
        G = R + B.T @ X @ B
        K = np.linalg.solve(G, B.T @ X @ A + S.T)
        Xn = A.T @ X @ A + Q - (A.T @ X @ B + S) @ K
        Xn = 0.5 * (Xn + Xn.T)
        delta = np.linalg.norm(Xn - X)
        X = Xn
        if delta <= DOUBLING_TOL * (1.0 + np.linalg.norm(X)):
            return X
    raise ConvergenceError("fixed-point Riccati iteration did not converge",
                           residual=float(delta))


def _is_stabilizing(A, B, R, S, X) -> bool:
    K = np.linalg.solve(R + B.T @ X @ B, B.T @ X @ A + S.T)
    return is_schur(A - B @ K, margin=0.0)


def solve_dare(A, B, Q, R, S=None, residual_tol: float = 1e-10) -> np.ndarray:
    """Stabilizing solution of the generic DARE above.

    Runs the doubling iteration on the shifted (cross-term free) equation,
    falling back to fixed-point iteration of the raw equation and finally to
    the QZ (generalized Schur) solver.  The extra fallback covers the
    degenerate spectral-factorization family where the shifted constant term
    vanishes and the first two methods stall on the non-stabilizing zero
    solution.  The result satisfies the equation to residual_tol*(1 + ||X||)
    and makes the closed loop Schur.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if S is None:
        S = np.zeros((n, B.shape[1]))
    S = np.atleast_2d(np.asarray(S, dtype=float))

    # shift the cross term: equivalent equation with A0 = A - B R^{-1} S^T
    Rinv_St = np.linalg.solve(R, S.T)
    A0 = A - B @ Rinv_St
    Q0 = Q - S @ Rinv_St
    Q0 = 0.5 * (Q0 + Q0.T)
    G0 = B @ np.linalg.solve(R, B.T)
    G0 = 0.5 * (G0 + G0.T)

    def acceptable(X):
        return (X is not None
                and dare_residual(A, B, Q, R, S, X) <= residual_tol * (1.0 + np.linalg.norm(X))
                and _is_stabilizing(A, B, R, S, X))

    last_residual = None
    for method in ("doubling", "fixed-point", "qz"):
        try:
            if method == "doubling":
                X = _doubling(A0, G0, Q0)
            elif method == "fixed-point":
                X = _fixed_point(A, B, Q, R, S)
            else:
                from scipy.linalg import solve_discrete_are
                X = solve_discrete_are(A, B, Q, R, s=S)
                X = 0.5 * (X + X.T)
        except (NumericError, np.linalg.LinAlgError, ValueError):
            continue
        last_residual = dare_residual(A, B, Q, R, S, X)
        if acceptable(X):
            return X
    raise ConvergenceError("no stabilizing Riccati solution found",
                           residual=last_residual)


def _pbh_rank_deficient(blocks: np.ndarray) -> bool:
    s = np.linalg.svd(blocks, compute_uv=False)
    n = blocks.shape[0]
    return s[n - 1] <= PBH_RTOL * max(1.0, s[0])


def check_stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    """PBH test: rank [lambda*I - A, B] = n at every |lambda| >= 1."""
    n = A.shape[0]
    if n == 0:
        return True
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - 1e-9:
            if _pbh_rank_deficient(np.hstack([lam * np.eye(n) - A, B.astype(complex)])):
                return False
    return True


def check_detectable(C: np.ndarray, A: np.ndarray) -> bool:
    """PBH test: rank [lambda*I - A; C] = n at every |lambda| >= 1."""
    return check_stabilizable(A.T, C.T)


def dare_stabilizing(model: StateSpaceModel, side: str) -> np.ndarray:
    """Stabilizing solution of the normalized-factor Riccati equations.

    side="filter" solves
        P = A P A^T + B B^T - (B D^T + A P C^T)(I + D D^T + C P C^T)^{-1} (.)^T
    so that A - L0 C is Schur for the induced gain; side="control" solves the
    dual equation making A + B F0 Schur.
    """
    A, B, C, D = model.A, model.B, model.C, model.D
    if not check_stabilizable(A, B):
        raise StructuralError("(A, B) is not stabilizable (PBH test failed)")
    if not check_detectable(C, A):
        raise StructuralError("(C, A) is not detectable (PBH test failed)")
    m = model.m
    p = model.p
    if side == "filter":
        # dual substitution: a = A^T, b = C^T, q = B B^T, r = I + D D^T, s = B D^T
        P = solve_dare(A.T, C.T, B @ B.T, np.eye(m) + D @ D.T, B @ D.T)
        L = filter_gain(model, P)
        if model.n and not is_schur(A - L @ C, margin=0.0):
            raise StructuralError("filter Riccati solution is not stabilizing")
        return P
    if side == "control":
        Q = solve_dare(A, B, C.T @ C, np.eye(p) + D.T @ D, C.T @ D)
        F = control_gain(model, Q)
        if model.n and not is_schur(A + B @ F, margin=0.0):
            raise StructuralError("control Riccati solution is not stabilizing")
        return Q
    raise ValueError(f"side must be 'filter' or 'control', got {side!r}")


def filter_gain(model: StateSpaceModel, P: np.ndarray) -> np.ndarray:
    """L0 = (B D^T + A P C^T)(I + D D^T + C P C^T)^{-1}."""
    A, B, C, D = model.A, model.B, model.C, model.D
    R = np.eye(model.m) + D @ D.T + C @ P @ C.T
    return np.linalg.solve(R.T, (B @ D.T + A @ P @ C.T).T).T


def control_gain(model: StateSpaceModel, Q: np.ndarray) -> np.ndarray:
    """F0 = -(I + D^T D + B^T Q B)^{-1} (D^T C + B^T Q A)."""
    A, B, C, D = model.A, model.B, model.C, model.D
    R = np.eye(model.p) + D.T @ D + B.T @ Q @ B
    return -np.linalg.solve(R, D.T @ C + B.T @ Q @ A)
