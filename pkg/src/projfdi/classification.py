"""Binary and multi-class fault classification over image subspaces.

Each class carries a normalized representation and an uncertainty radius;
its threshold is the residual-driven formula evaluated on the projection
energy for that class.  Binary classification follows the three-range logic
(fault-free / warning / faulty) with an explicit "inconsistent" verdict for
the both-above case the three ranges omit; the multi-class decision keeps
every class whose residual stays below threshold, reporting multiple
memberships rather than tie-breaking.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, StructuralError
from .factorization import NormalizedRepresentation
from .gap import gap
from .projection import ProjectionEngine, engine_for, image_data
from .signals import SignalWindow, stack_windows
from .thresholds import ThresholdReport, adaptive_threshold

__all__ = [
    "FaultClassModel", "ClassificationVerdict", "binary_classify",
    "residual_range_bound", "classifiability_check", "multiclass_classify",
    "estimate_overlap", "overlap_construct",
]

GAP_EDGE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class FaultClassModel:
    """One fault class: label, normalized model, uncertainty radius."""

    label: str
    rep: NormalizedRepresentation
    delta_i: float

    def __post_init__(self):
        if not 0.0 < self.delta_i < 1.0:
            raise DimensionError("class uncertainty radius must lie in (0, 1)")

    def threshold_report(self, w: SignalWindow) -> ThresholdReport:
        dec = engine_for(self.rep).decompose(w)
        return adaptive_threshold(self.delta_i, dec.data_norm_sq,
                                  dec.total_norm_sq, dec.truncation_bound)

    def to_json(self) -> dict:
        return {"label": self.label, "delta_i": self.delta_i,
                "rep": self.rep.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "FaultClassModel":
        return cls(label=obj["label"], delta_i=float(obj["delta_i"]),
                   rep=NormalizedRepresentation.from_json(obj["rep"]))


@dataclass(frozen=True, eq=False)
class ClassificationVerdict:
    """Per-class residual/threshold table plus the aggregate decision."""

    per_class: tuple
    decision: str              # "single", "multiple", "warning", "none"
    labels: tuple

    def to_json(self) -> dict:
        return {
            "decision": self.decision,
            "labels": list(self.labels),
            "per_class": [
                {"label": lab, "J": J, "J_th": J_th, "in_class": ok}
                for (lab, J, J_th, ok) in self.per_class
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _stack(u: SignalWindow, y: SignalWindow) -> SignalWindow:
    if u.start_index != y.start_index or u.length != y.length:
        raise DimensionError("u and y windows must be aligned")
    return stack_windows(u, y)


def binary_classify(m0: FaultClassModel, m1: FaultClassModel,
                    u: SignalWindow, y: SignalWindow,
                    pair_gap: float | None = None) -> str:
    """Three-range decision between the nominal and faulty class models.

    Returns "fault-free", "warning" (both residuals below threshold, the
    overlap region), "faulty", or "inconsistent" (both above threshold).
    """
    if pair_gap is None:
        pair_gap = gap(m0.rep, m1.rep).gap
    if not GAP_EDGE_TOL < pair_gap < 1.0 - GAP_EDGE_TOL:
        raise StructuralError(
            f"binary classification assumes 0 < gap < 1, got {pair_gap:.3g}")
    w = _stack(u, y)
    r0 = m0.threshold_report(w)
    r1 = m1.threshold_report(w)
    if not r0.faulty and r1.faulty:
        return "fault-free"
    if not r0.faulty and not r1.faulty:
        return "warning"
    if r0.faulty and not r1.faulty:
        return "faulty"
    return "inconsistent"


def residual_range_bound(mi: FaultClassModel, mj: FaultClassModel,
                         u: SignalWindow, y: SignalWindow,
                         tolerance: float = 1e-6) -> float:
    """Gap-based ceiling on the class-i residual for data from class j.

    Returns the bound gap(I_j, I_i) * ||[u; y]||; warns when the measured
    residual exceeds it beyond the tolerance (a gap underestimate).
    """
    w = _stack(u, y)
    g = gap(mj.rep, mi.rep).gap
    bound = g * w.norm()
    resid = float(np.sqrt(engine_for(mi.rep).decompose(w).total_norm_sq))
    if resid > bound + tolerance * (1.0 + w.norm()):
        warnings.warn(
            f"residual {resid:.6g} exceeds gap bound {bound:.6g}; "
            "the computed gap may underestimate the true one",
            stacklevel=2)
    return bound


def classifiability_check(classes, tol: float = 1e-2) -> np.ndarray:
    """Pairwise matrix: gap(I_i, I_j) > max(delta_i, delta_j) for i != j."""
    if len(classes) < 2:
        raise DimensionError("classifiability needs at least two classes")
    M = len(classes)
    out = np.eye(M, dtype=bool)
    for i in range(M):
        for j in range(i + 1, M):
            g = gap(classes[i].rep, classes[j].rep, tol).gap
            ok = g > max(classes[i].delta_i, classes[j].delta_i)
            out[i, j] = out[j, i] = ok
    return out


def multiclass_classify(classes, u: SignalWindow, y: SignalWindow) -> ClassificationVerdict:
    """Residual-vs-threshold membership over all classes.

    decision: "single" for exactly one member, "multiple" for several (the
    overlap case, never tie-broken), "none" when every residual exceeds its
    threshold.
    """
    w = _stack(u, y)
    rows = []
    members = []
    for cls in classes:
        rep = cls.threshold_report(w)
        ok = not rep.faulty
        rows.append((cls.label, rep.J, rep.J_th, ok))
        if ok:
            members.append(cls.label)
    if len(members) == 1:
        decision = "single"
    elif len(members) >= 2:
        decision = "multiple"
    else:
        decision = "none"
    return ClassificationVerdict(per_class=tuple(rows), decision=decision,
                                 labels=tuple(members))


def _settle_steps(model, amplitude_tol: float = 1e-13, cap: int = 4000) -> int:
    from .statespace import spectral_radius
    rho = spectral_radius(model.A) if model.n else 0.0
    if rho <= 0.0:
        return 1
    return min(cap, int(np.ceil(np.log(amplitude_tol) / np.log(rho))))


def overlap_construct(m0: FaultClassModel, m1: FaultClassModel,
                      rng: np.random.Generator, length: int = 48,
                      tol: float = 1e-6, max_iter: int = 500) -> SignalWindow | None:
    """Alternating projections toward a common element of both images.

    Starts from random data on a window long enough to hold the ring-down of
    either image, alternately projects onto the two image subspaces
    (renormalizing each round), and stops when both distances are below tol.
    The iterate converges whenever the gap is below one; for pairs whose
    frequency responses never meet on the circle the joint distance has a
    positive floor and None is returned after max_iter rounds.
    """
    e0: ProjectionEngine = engine_for(m0.rep)
    e1: ProjectionEngine = engine_for(m1.rep)
    ch = m0.rep.plant.p + m0.rep.plant.m
    horizon = length + max(_settle_steps(e0.sir), _settle_steps(e1.sir))
    w = SignalWindow(rng.standard_normal((length, ch)), 0)
    w = w.scaled(1.0 / w.norm())
    for _ in range(max_iter):
        for eng in (e0, e1):
            v = eng.projection_coefficients(w)
            w = SignalWindow(_simulate_latent(eng, v, horizon), 0)
        nrm = w.norm()
        if nrm < 1e-9:
            return None
        w = w.scaled(1.0 / nrm)
        d0 = np.sqrt(e0.decompose(w).total_norm_sq)
        d1 = np.sqrt(e1.decompose(w).total_norm_sq)
        if max(d0, d1) <= tol:
            return w
    return None


def _simulate_latent(eng: ProjectionEngine, v: SignalWindow, horizon: int) -> np.ndarray:
    from .statespace import simulate_from
    vin = v.restrict(0, horizon)
    y, _ = simulate_from(eng.sir, vin.samples)
    return y


def estimate_overlap(m0: FaultClassModel, m1: FaultClassModel,
                     n_samples: int, seed: int, length: int = 48) -> float:
    """Monte Carlo fraction of class-1 image data that class 0 also accepts.

    Random unit-energy latents drive the class-1 image; the fraction whose
    class-0 residual stays below the class-0 threshold probes the warning
    (overlap) region.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_samples):
        v = SignalWindow(rng.standard_normal((length, m1.rep.plant.p)), 0)
        v = v.scaled(1.0 / v.norm())
        w, _ = image_data(m1.rep.image_model, v, tail_tol=1e-18)
        if not m0.threshold_report(w).faulty:
            hits += 1
    return hits / n_samples
