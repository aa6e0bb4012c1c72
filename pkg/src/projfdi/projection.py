"""Projection of data windows onto system image subspaces.

The distance of a stacked data window w = [u; y] from the image subspace of
a normalized stable image representation I_G is computed through two exact
finite computations:

* kernel route: energy of the observer residual r0 = K_G w (forward filter
  plus an exact Lyapunov ring-down term) plus the past-term energy;
* adjoint route: ||w||^2 minus the energy of the causal part of the
  anticausal filter output sigma = I_G~ w.

Both routes value the same quantity; their discrepancy is recorded as a
numerical self-check.  The past term is the part of sigma supported on
k <= -1; it is what makes the projection residual strictly more sensitive
than the observer residual alone.
"""
from __future__ import annotations

import json
import weakref
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, StructuralError
from .factorization import NormalizedRepresentation
from .signals import SignalWindow, stack_windows
from .statespace import (StateSpaceModel, is_schur, observability_gramian,
                         simulate_from)

__all__ = [
    "ResidualDecomposition", "ProjectionEngine", "engine_for",
    "observer_residual", "sir_adjoint_output", "hankel_past_term",
    "projection_residual_norm", "distance_to_image", "image_data",
]

ROUNDOFF_SCALE = 1e-12
PAST_WINDOW_TAIL = 1e-12


@dataclass(frozen=True, eq=False)
class ResidualDecomposition:
    """Energy split of the projection residual.

    total_norm_sq = observer_norm_sq + hankel_norm_sq, with the alternative
    adjoint-route value retained through cross_route_discrepancy.
    """

    observer_norm_sq: float
    hankel_norm_sq: float
    total_norm_sq: float
    truncation_bound: float
    cross_route_discrepancy: float = 0.0
    data_norm_sq: float = 0.0

    def to_json(self) -> dict:
        return {
            "observer_norm_sq": self.observer_norm_sq,
            "hankel_norm_sq": self.hankel_norm_sq,
            "total_norm_sq": self.total_norm_sq,
            "truncation_bound": self.truncation_bound,
            "cross_route_discrepancy": self.cross_route_discrepancy,
            "data_norm_sq": self.data_norm_sq,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


class ProjectionEngine:
    """Projection computations for one image subspace.

    Parameters
    ----------
    sir:
        Stable image representation, mapping the latent signal to the stacked
        data channels; must satisfy I~I = I on the circle.
    skr:
        Optional stable kernel representation with K K~ = I and K I = 0,
        acting on the stacked data channels.  When present it provides the
        observer (kernel) route and the cross-route check.
    """

    def __init__(self, sir: StateSpaceModel, skr: StateSpaceModel | None = None):
        if skr is not None and skr.p != sir.m:
            raise DimensionError("kernel input width must match image output width")
        if sir.n and not is_schur(sir.A):
            raise StructuralError("image representation must be stable")
        if skr is not None and skr.n and not is_schur(skr.A):
            raise StructuralError("kernel representation must be stable")
        self.sir = sir
        self.skr = skr
        # adjoint realization of I_G~: xi(k-1) = Abar xi(k) + Bbar w(k)
        self._Abar = sir.A.T
        self._Bbar = sir.C.T
        self._Cbar = sir.B.T
        self._Dbar = sir.D.T
        # exact ring-down energy matrices
        self._G_adj = observability_gramian(self._Abar, self._Cbar)
        self._G_skr = observability_gramian(skr.A, skr.C) if skr is not None else None
        self._G_sir = observability_gramian(sir.A, sir.C)

    # -- anticausal pass ---------------------------------------------------

    def adjoint_pass(self, w: SignalWindow):
        """Backward filter sigma = I_G~ w over the window.

        Returns (samples over the window, state below the window,
        explicit past energy inside the window, energy of the window part).
        """
        if w.channel_count != self.sir.m:
            raise DimensionError(
                f"data has {w.channel_count} channels, image outputs {self.sir.m}")
        samples = w.samples
        k0 = w.start_index
        sig = np.empty((len(samples), self.sir.p))
        xi = np.zeros(self.sir.n)
        for idx in range(len(samples) - 1, -1, -1):
            row = samples[idx]
            sig[idx] = self._Cbar @ xi + self._Dbar @ row
            xi = self._Abar @ xi + self._Bbar @ row
        window_energy = float(np.sum(sig * sig))
        past_in_window = 0.0
        if k0 < 0:
            upto = min(-1, w.end_index) - k0 + 1
            past_in_window = float(np.sum(sig[:upto] * sig[:upto]))
        return sig, xi, past_in_window, window_energy

    def adjoint_energy(self, w: SignalWindow):
        """(||sigma||^2 exact, past-term energy exact, window samples, state)."""
        sig, xi, past_in_window, window_energy = self.adjoint_pass(w)
        tail = float(xi @ self._G_adj @ xi)
        total = window_energy + tail
        # below-window ring-down; only the part at k <= -1 belongs to the past
        if w.start_index <= 0:
            past = past_in_window + tail
        else:
            xi_at = xi
            for _ in range(w.start_index):
                xi_at = self._Abar @ xi_at
            past = float(xi_at @ self._G_adj @ xi_at)
        return total, past, sig, xi

    # -- causal (kernel) pass ----------------------------------------------

    def kernel_energy(self, w: SignalWindow):
        """||K_G w||^2 with the exact post-window ring-down term."""
        if self.skr is None:
            raise StructuralError("engine was built without a kernel representation")
        if w.channel_count != self.skr.p:
            raise DimensionError("data channel count does not match the kernel")
        r, x_end = simulate_from(self.skr, w.samples)
        energy = float(np.sum(r * r)) + float(x_end @ self._G_skr @ x_end)
        return energy, r

    # -- residual decomposition ---------------------------------------------

    def decompose(self, w: SignalWindow) -> ResidualDecomposition:
        data_sq = w.energy()
        adj_sq, past_sq, _, _ = self.adjoint_energy(w)
        route_adjoint = max(data_sq - adj_sq + past_sq, 0.0)
        if self.skr is not None:
            kern_sq, _ = self.kernel_energy(w)
            total = kern_sq + past_sq
            observer_sq = kern_sq
            discrepancy = abs(total - route_adjoint)
        else:
            total = route_adjoint
            observer_sq = max(data_sq - adj_sq, 0.0)
            discrepancy = 0.0
        tb = ROUNDOFF_SCALE * (1.0 + data_sq)
        return ResidualDecomposition(
            observer_norm_sq=observer_sq,
            hankel_norm_sq=past_sq,
            total_norm_sq=total,
            truncation_bound=tb,
            cross_route_discrepancy=discrepancy,
            data_norm_sq=data_sq,
        )

    # -- projection reconstruction ------------------------------------------

    def projection_coefficients(self, w: SignalWindow) -> SignalWindow:
        """Causal part of sigma: latent coefficients of the projection."""
        sig, xi, _, _ = self.adjoint_pass(w)
        k0, k1 = w.start_index, w.end_index
        if k1 < 0:
            return SignalWindow(np.zeros((1, self.sir.p)), 0)
        if k0 >= 0:
            lead = []
            xi_at = xi
            # ring-down samples fill [0, k0-1] when the data starts later
            for _ in range(k0):
                lead.append(self._Cbar @ xi_at)
                xi_at = self._Abar @ xi_at
            lead.reverse()
            rows = np.vstack([np.array(lead).reshape(-1, self.sir.p), sig]) if lead else sig
            return SignalWindow(rows, 0)
        return SignalWindow(sig[-k0:], 0)

    def projection_signal(self, w: SignalWindow, end_index: int | None = None) -> SignalWindow:
        """Projection of w onto the image subspace, realized on [0, end_index]."""
        v = self.projection_coefficients(w)
        if end_index is None:
            end_index = max(w.end_index, v.end_index)
        vin = v.restrict(0, end_index)
        y, _ = simulate_from(self.sir, vin.samples)
        return SignalWindow(y, 0)


_engine_cache: "weakref.WeakKeyDictionary[NormalizedRepresentation, ProjectionEngine]" = \
    weakref.WeakKeyDictionary()


def engine_for(rep: NormalizedRepresentation) -> ProjectionEngine:
    """Cached projection engine of a normalized representation."""
    eng = _engine_cache.get(rep)
    if eng is None:
        eng = ProjectionEngine(rep.image_model, rep.kernel_model)
        _engine_cache[rep] = eng
    return eng


def _stack_aligned(u: SignalWindow, y: SignalWindow, rep: NormalizedRepresentation) -> SignalWindow:
    if u.channel_count != rep.plant.p:
        raise DimensionError(f"u has {u.channel_count} channels, plant expects {rep.plant.p}")
    if y.channel_count != rep.plant.m:
        raise DimensionError(f"y has {y.channel_count} channels, plant yields {rep.plant.m}")
    if u.start_index != y.start_index or u.length != y.length:
        raise DimensionError("u and y windows must be aligned")
    return stack_windows(u, y)


def observer_residual(rep: NormalizedRepresentation, u: SignalWindow,
                      y: SignalWindow, xhat0=None) -> SignalWindow:
    """Observer residual r0(k) = W0 (y(k) - yhat(k)) over the data window."""
    w = _stack_aligned(u, y, rep)
    A, B, C, D = rep.plant.A, rep.plant.B, rep.plant.C, rep.plant.D
    L0, W0 = rep.L0, rep.W0
    AL = A - L0 @ C
    BL = B - L0 @ D
    if xhat0 is None:
        xhat0 = np.zeros(rep.plant.n)
    x = np.asarray(xhat0, dtype=float).reshape(-1)
    if x.shape[0] != rep.plant.n:
        raise DimensionError("xhat0 length must equal the state dimension")
    uu, yy = u.samples, y.samples
    r = np.empty((len(uu), rep.plant.m))
    for k in range(len(uu)):
        r[k] = W0 @ (yy[k] - C @ x - D @ uu[k])
        x = AL @ x + BL @ uu[k] + L0 @ yy[k]
    return SignalWindow(r, w.start_index)


def sir_adjoint_output(rep: NormalizedRepresentation, u: SignalWindow,
                       y: SignalWindow) -> SignalWindow:
    """Anticausal filter output sigma = I_G~ [u; y] over the data window."""
    w = _stack_aligned(u, y, rep)
    sig, _, _, _ = engine_for(rep).adjoint_pass(w)
    return SignalWindow(sig, w.start_index)


def hankel_past_term(rep: NormalizedRepresentation, u: SignalWindow, y: SignalWindow):
    """Past component of sigma (support k <= -1).

    Returns (window, norm_sq, truncation_bound): norm_sq is exact (window sum
    plus Lyapunov tail); the window is truncated where the remaining tail
    drops below 1e-12 of the total, and truncation_bound certifies the part
    of norm_sq lying below the returned window.
    """
    w = _stack_aligned(u, y, rep)
    if w.end_index < 0:
        raise DimensionError("data window must contain samples at indices >= 0")
    eng = engine_for(rep)
    _, norm_sq, sig, xi = eng.adjoint_energy(w)
    k0 = w.start_index
    rows = []
    if k0 < 0:
        rows = list(sig[:min(-1, w.end_index) - k0 + 1])
    # extend the display window below the data until the tail is negligible
    xi_at = xi
    for _ in range(max(0, k0)):
        xi_at = eng._Abar @ xi_at
    tail = float(xi_at @ eng._G_adj @ xi_at)
    extra = []
    target = max(PAST_WINDOW_TAIL * norm_sq, 1e-300)
    while tail > target and len(extra) < 10_000:
        extra.append(eng._Cbar @ xi_at)
        xi_at = eng._Abar @ xi_at
        tail = float(xi_at @ eng._G_adj @ xi_at)
    samples = np.array(list(reversed(extra)) + rows).reshape(-1, rep.plant.p)
    if samples.size == 0:
        samples = np.zeros((1, rep.plant.p))
    window = SignalWindow(samples, -samples.shape[0])
    tb = tail + ROUNDOFF_SCALE * (1.0 + norm_sq)
    return window, norm_sq, tb


def projection_residual_norm(rep: NormalizedRepresentation, u: SignalWindow,
                             y: SignalWindow) -> ResidualDecomposition:
    """Squared distance of [u; y] from the image subspace, both routes."""
    w = _stack_aligned(u, y, rep)
    return engine_for(rep).decompose(w)


def distance_to_image(rep: NormalizedRepresentation, u: SignalWindow,
                      y: SignalWindow) -> float:
    """dist([u; y], image subspace) = sqrt of the residual energy."""
    return float(np.sqrt(projection_residual_norm(rep, u, y).total_norm_sq))


def image_data(sir: StateSpaceModel, v: SignalWindow, tail_tol: float = 1e-16,
               max_extension: int = 20_000):
    """Windowed element of the image subspace: w = I_G v plus ring-down.

    The window is extended past the latent support until the chopped tail
    energy is below tail_tol times the captured energy; that bound is
    returned alongside the window.
    """
    if v.start_index < 0:
        raise DimensionError("latent signal must be supported on k >= 0")
    if v.channel_count != sir.p:
        raise DimensionError("latent channel count does not match the image input")
    Go = observability_gramian(sir.A, sir.C)
    y, x = simulate_from(sir, v.restrict(0, v.end_index).samples)
    chunks = [y]
    energy = float(np.sum(y * y))
    tail = float(x @ Go @ x)
    steps = 0
    zeros = np.zeros((32, sir.p))
    while tail > tail_tol * max(energy, 1e-300) and steps < max_extension:
        yk, x = simulate_from(sir, zeros, x0=x)
        chunks.append(yk)
        energy += float(np.sum(yk * yk))
        tail = float(x @ Go @ x)
        steps += 32
    w = SignalWindow(np.vstack(chunks), 0)
    return w, tail
