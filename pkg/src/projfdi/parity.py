"""Finite-horizon I/O kernel models and parity residual detection.

The stacked model y_s(k) = Gamma_s L_p z_p + H_us u_s(k) predicts the output
window from past I/O data (an observer-based state reconstruction) and the
input window.  Its normalized kernel and image matrices give an orthogonal
projection in finite dimensions; the parity residual is the data component
the kernel removes, whitened by Sigma^{-1/2}.  The model is built either
from a state-space plant with an observer gain or identified from logged
data by one-shot least squares.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DimensionError, IdentificationError, StructuralError
from .factorization import inv_sqrt_psd
from .signals import SignalWindow
from .statespace import StateSpaceModel, is_schur
from .thresholds import ThresholdReport, adaptive_threshold

__all__ = [
    "IOKernelModel", "build_io_model", "identify_io_model", "parity_residual",
    "io_threshold", "stack_past", "sliding_windows", "deadbeat_observer_gain",
    "read_log_csv", "write_log_csv", "sliding_detection", "sliding_detection_csv",
]


def deadbeat_observer_gain(model: StateSpaceModel) -> np.ndarray:
    """Ackermann gain placing all eigenvalues of A - K C at zero.

    Single-output observable plants only.  With a deadbeat gain the past
    window reconstructs the state exactly for any s_p >= n, which makes the
    noise-free I/O regression well posed at s_p = n.
    """
    if model.m != 1:
        raise DimensionError("deadbeat gain construction requires one output")
    n = model.n
    if n == 0:
        return np.zeros((0, 1))
    from .statespace import observability_matrix
    O = observability_matrix(model)
    if np.linalg.matrix_rank(O) < n:
        raise StructuralError("plant is not observable; no deadbeat gain exists")
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    x = np.linalg.solve(O, e_n)
    return (np.linalg.matrix_power(model.A, n) @ x).reshape(n, 1)


@dataclass(frozen=True, eq=False)
class IOKernelModel:
    """Stacked finite-horizon matrices with their normalized kernel/image."""

    s: int
    s_p: int
    p: int
    m: int
    Gamma_s: np.ndarray
    H_us: np.ndarray
    L_p: np.ndarray
    Sigma: np.ndarray
    K_io: np.ndarray
    I_io: np.ndarray
    Sigma_hat: np.ndarray
    staleness: float = 0.0   # ||A_K^{s_p}||, state-reconstruction bias scale
    regression_rms: float = 0.0

    @property
    def past_len(self) -> int:
        return self.s_p * (self.p + self.m)

    @property
    def window_len(self) -> int:
        return (self.s + 1) * self.p

    @property
    def output_len(self) -> int:
        return (self.s + 1) * self.m

    @cached_property
    def theta(self) -> np.ndarray:
        """Combined regression matrix [Gamma_s L_p, H_us]."""
        return np.hstack([self.Gamma_s @ self.L_p, self.H_us])

    @cached_property
    def sigma_inv_half(self) -> np.ndarray:
        return inv_sqrt_psd(self.Sigma)

    def to_json(self) -> dict:
        return {
            "s": self.s, "s_p": self.s_p, "p": self.p, "m": self.m,
            "Gamma_s": self.Gamma_s.tolist(), "H_us": self.H_us.tolist(),
            "L_p": self.L_p.tolist(), "Sigma": self.Sigma.tolist(),
            "K_io": self.K_io.tolist(), "I_io": self.I_io.tolist(),
            "Sigma_hat": self.Sigma_hat.tolist(), "staleness": self.staleness,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "IOKernelModel":
        def arr(key):
            return np.atleast_2d(np.asarray(obj[key], dtype=float))
        return cls(s=int(obj["s"]), s_p=int(obj["s_p"]), p=int(obj["p"]),
                   m=int(obj["m"]), Gamma_s=arr("Gamma_s"), H_us=arr("H_us"),
                   L_p=arr("L_p"), Sigma=arr("Sigma"), K_io=arr("K_io"),
                   I_io=arr("I_io"), Sigma_hat=arr("Sigma_hat"),
                   staleness=float(obj.get("staleness", 0.0)))


def _normalized_forms(Gamma_L: np.ndarray, H_us: np.ndarray):
    """(Sigma, K_io, I_io, Sigma_hat) from the combined stacked matrices."""
    rows = Gamma_L.shape[0]
    past = Gamma_L.shape[1]
    ins = H_us.shape[1]
    full = np.hstack([-Gamma_L, -H_us, np.eye(rows)])
    Sigma = full @ full.T
    K_io = inv_sqrt_psd(Sigma) @ full
    top = np.hstack([Gamma_L, H_us])
    I_stack = np.vstack([np.eye(past + ins), top])
    Sigma_hat = I_stack.T @ I_stack
    I_io = I_stack @ inv_sqrt_psd(Sigma_hat)
    return Sigma, K_io, I_io, Sigma_hat


def build_io_model(model: StateSpaceModel, K: np.ndarray, s: int, s_p: int) -> IOKernelModel:
    """Stacked I/O model of a plant with observer gain K.

    Requires A - K C Schur and horizons of at least one sample; the usual
    choice is s, s_p >= n.  L_p z_p reconstructs x(k - s) from the past
    window up to a bias of order ||A_K^{s_p}||, reported as `staleness`.
    """
    if s < 1 or s_p < 1:
        raise DimensionError("horizons s and s_p must be at least 1")
    A, B, C, D = model.A, model.B, model.C, model.D
    n, p, m = model.n, model.p, model.m
    K = np.asarray(K, dtype=float).reshape(n, m)
    A_K = A - K @ C
    if n and not is_schur(A_K):
        raise StructuralError("A - K C must be Schur")
    B_K = B - K @ D

    Gamma = np.zeros(((s + 1) * m, n))
    X = C.copy()
    for i in range(s + 1):
        Gamma[i * m:(i + 1) * m] = X
        X = X @ A
    H = np.zeros(((s + 1) * m, (s + 1) * p))
    markov = [D]
    X = B.copy()
    for _ in range(s):
        markov.append(C @ X)
        X = A @ X
    for r in range(s + 1):
        for c in range(r + 1):
            H[r * m:(r + 1) * m, c * p:(c + 1) * p] = markov[r - c]

    # L_p: oldest past sample first, inputs block then outputs block
    Lu = np.zeros((n, s_p * p))
    Ly = np.zeros((n, s_p * m))
    Xu, Xy = B_K.copy(), K.copy()
    for j in range(s_p - 1, -1, -1):
        Lu[:, j * p:(j + 1) * p] = Xu
        Ly[:, j * m:(j + 1) * m] = Xy
        Xu = A_K @ Xu
        Xy = A_K @ Xy
    L_p = np.hstack([Lu, Ly])

    Sigma, K_io, I_io, Sigma_hat = _normalized_forms(Gamma @ L_p, H)
    staleness = float(np.linalg.norm(np.linalg.matrix_power(A_K, s_p), 2)) if n else 0.0
    return IOKernelModel(s=s, s_p=s_p, p=p, m=m, Gamma_s=Gamma, H_us=H,
                         L_p=L_p, Sigma=Sigma, K_io=K_io, I_io=I_io,
                         Sigma_hat=Sigma_hat, staleness=staleness)


def stack_past(u_log: SignalWindow, y_log: SignalWindow, k: int, s: int, s_p: int):
    """(z_p, u_s, y_s) at evaluation index k (absolute, oldest sample first)."""
    u_p = np.concatenate([u_log.at(k - s - s_p + j) for j in range(s_p)])
    y_p = np.concatenate([y_log.at(k - s - s_p + j) for j in range(s_p)])
    u_s = np.concatenate([u_log.at(k - s + j) for j in range(s + 1)])
    y_s = np.concatenate([y_log.at(k - s + j) for j in range(s + 1)])
    return np.concatenate([u_p, y_p]), u_s, y_s


def identify_io_model(u_log: SignalWindow, y_log: SignalWindow, s: int, s_p: int,
                      ridge: float = 0.0) -> IOKernelModel:
    """One-shot least-squares fit of [Gamma_s L_p, H_us] from logged data.

    Regressors are the stacked [z_p; u_s] windows sliding over the log;
    ridge > 0 regularizes rank-deficient (poorly excited) data.  Raises when
    the log is too short or the regressor matrix is rank deficient without
    ridge.
    """
    if u_log.start_index != y_log.start_index or u_log.length != y_log.length:
        raise DimensionError("input and output logs must be aligned")
    p, m = u_log.channel_count, y_log.channel_count
    need = 4 * (s + s_p + 1) * (p + m)
    if u_log.length < need:
        raise IdentificationError(
            f"log too short: {u_log.length} samples, need at least {need}")
    k_first = u_log.start_index + s + s_p
    ks = range(k_first, u_log.end_index + 1)
    regs, outs = [], []
    for k in ks:
        z_p, u_s, y_s = stack_past(u_log, y_log, k, s, s_p)
        regs.append(np.concatenate([z_p, u_s]))
        outs.append(y_s)
    R = np.asarray(regs)            # (N, past + (s+1)p)
    Y = np.asarray(outs)            # (N, (s+1)m)
    gram = R.T @ R
    if ridge > 0.0:
        gram = gram + ridge * np.eye(gram.shape[0])
    else:
        svals = np.linalg.svd(gram, compute_uv=False)
        if svals[-1] <= 1e-10 * max(svals[0], 1.0):
            raise IdentificationError(
                "regressor matrix is rank deficient (input not persistently "
                "exciting); pass ridge > 0")
    theta = np.linalg.solve(gram, R.T @ Y).T    # ((s+1)m, past + (s+1)p)
    past_cols = s_p * (p + m)
    Gamma_L = theta[:, :past_cols]
    H_us = theta[:, past_cols:]
    rms = float(np.sqrt(np.mean((Y - R @ theta.T) ** 2)))
    Sigma, K_io, I_io, Sigma_hat = _normalized_forms(Gamma_L, H_us)
    # identified models expose only the product Gamma_s L_p; store it in
    # L_p with Gamma_s = I so downstream formulas stay uniform
    return IOKernelModel(s=s, s_p=s_p, p=p, m=m,
                         Gamma_s=np.eye((s + 1) * m), H_us=H_us,
                         L_p=Gamma_L, Sigma=Sigma, K_io=K_io, I_io=I_io,
                         Sigma_hat=Sigma_hat, staleness=float("nan"),
                         regression_rms=rms)


def parity_residual(io: IOKernelModel, z_p: np.ndarray, u_s: np.ndarray,
                    y_s: np.ndarray):
    """Whitened parity residual r_s = Sigma^{-1/2}(y_s - Gamma_s L_p z_p - H_us u_s)."""
    z_p = np.asarray(z_p, dtype=float).reshape(-1)
    u_s = np.asarray(u_s, dtype=float).reshape(-1)
    y_s = np.asarray(y_s, dtype=float).reshape(-1)
    if z_p.shape[0] != io.past_len or u_s.shape[0] != io.window_len \
            or y_s.shape[0] != io.output_len:
        raise DimensionError("stacked vector lengths do not match the model")
    raw = y_s - io.Gamma_s @ (io.L_p @ z_p) - io.H_us @ u_s
    r_s = io.sigma_inv_half @ raw
    return r_s, float(np.linalg.norm(r_s))


def io_threshold(delta_io: float, z_p: np.ndarray, u_s: np.ndarray,
                 y_s: np.ndarray, r_s_norm: float) -> ThresholdReport:
    """Residual-driven threshold for the parity residual at radius delta_io."""
    stacked_sq = float(np.sum(np.square(z_p)) + np.sum(np.square(u_s))
                       + np.sum(np.square(y_s)))
    return adaptive_threshold(delta_io, stacked_sq, r_s_norm * r_s_norm)


def sliding_windows(u_log: SignalWindow, y_log: SignalWindow, io: IOKernelModel):
    """Yield (k, z_p, u_s, y_s) for every index with a full history."""
    k_first = u_log.start_index + io.s + io.s_p
    for k in range(k_first, u_log.end_index + 1):
        yield (k, *stack_past(u_log, y_log, k, io.s, io.s_p))


def read_log_csv(text: str):
    """Parse a plant log `k,u0,..,y0,..` into aligned (u, y) windows."""
    import csv as _csv
    import io as _io
    reader = _csv.reader(_io.StringIO(text))
    header = next(reader)
    if not header or header[0] != "k":
        raise DimensionError("plant log CSV must start with a 'k' column")
    u_cols = [i for i, name in enumerate(header) if name.startswith("u")]
    y_cols = [i for i, name in enumerate(header) if name.startswith("y")]
    if not u_cols or not y_cols:
        raise DimensionError("plant log CSV needs u* and y* columns")
    ks, us, ys = [], [], []
    for rec in reader:
        if not rec:
            continue
        ks.append(int(rec[0]))
        us.append([float(rec[i]) for i in u_cols])
        ys.append([float(rec[i]) for i in y_cols])
    if not ks:
        raise DimensionError("plant log CSV holds no samples")
    if any(ks[i + 1] - ks[i] != 1 for i in range(len(ks) - 1)):
        raise DimensionError("plant log CSV indices must be contiguous")
    return (SignalWindow(np.asarray(us), ks[0]),
            SignalWindow(np.asarray(ys), ks[0]))


def write_log_csv(u_log: SignalWindow, y_log: SignalWindow) -> str:
    """Serialize aligned (u, y) windows as `k,u0,..,y0,..`."""
    import csv as _csv
    import io as _io
    if u_log.start_index != y_log.start_index or u_log.length != y_log.length:
        raise DimensionError("log windows must be aligned")
    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["k"] + [f"u{i}" for i in range(u_log.channel_count)]
                    + [f"y{i}" for i in range(y_log.channel_count)])
    for off in range(u_log.length):
        writer.writerow([u_log.start_index + off]
                        + [format(v, ".17g") for v in u_log.samples[off]]
                        + [format(v, ".17g") for v in y_log.samples[off]])
    return buf.getvalue()


def sliding_detection(u_log: SignalWindow, y_log: SignalWindow,
                      io: IOKernelModel, delta_io: float):
    """Per-index parity detection over a log; yields (k, r_norm, J_th, verdict)."""
    for k, z_p, u_s, y_s in sliding_windows(u_log, y_log, io):
        _, r_norm = parity_residual(io, z_p, u_s, y_s)
        rep = io_threshold(delta_io, z_p, u_s, y_s, r_norm)
        yield k, r_norm, rep.J_th, rep.verdict


def sliding_detection_csv(u_log: SignalWindow, y_log: SignalWindow,
                          io: IOKernelModel, delta_io: float) -> str:
    """Sliding-window detection as CSV `k,r_norm,J_th,verdict`."""
    import csv as _csv
    import io as _io
    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "r_norm", "J_th", "verdict"])
    for k, r_norm, J_th, verdict in sliding_detection(u_log, y_log, io, delta_io):
        writer.writerow([k, format(r_norm, ".17g"), format(J_th, ".17g"), verdict])
    return buf.getvalue()
