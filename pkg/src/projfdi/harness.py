"""Scenario harness: uncertainty injection, fault injection, Monte Carlo runs.

A scenario bundles a plant, a detection scheme, an uncertainty description,
a fault description, a horizon and a trial count.  Every trial owns an RNG
stream derived from (seed, trial index), so reports are byte-identical for
identical configs regardless of execution order or thread count
(PROJFDI_THREADS only sizes the pool).
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .additive import AdditiveModel, disturbance_factor
from .classification import FaultClassModel, multiclass_classify
from .closed_loop import (ControllerRealization, SchemeADetector,
                          closed_loop_sir_build, loop_uncertainty_blocks,
                          perturbed_plant, scheme_b_residual,
                          settled_loop_data, youla_controller)
from .exceptions import DimensionError, ProjFdiError
from .factorization import (NormalizedRepresentation, bezout_complements,
                            normalized_gains)
from .norms import hinf_norm
from .parity import (build_io_model, deadbeat_observer_gain, io_threshold,
                     parity_residual)
from .projection import engine_for
from .signals import SignalWindow, stack_windows
from .statespace import (StateSpaceModel, constant_model, inverse, is_schur,
                         parallel, series, simulate, spectral_radius,
                         stack_inputs, stack_outputs)
from .thresholds import ThresholdReport, adaptive_threshold, kernel_scheme_threshold

__all__ = [
    "ScenarioConfig", "DetectionReport", "UncertaintyDraw", "random_stable_system",
    "inject_uncertainty", "run_scenario", "benchmark_plant", "export_report",
    "load_config", "default_parity_model",
]

SCHEMES = ("open-loop", "closed-A", "closed-B", "kernel-L2", "parity", "classify")
UNCERTAINTY_KINDS = ("right-coprime", "left-coprime", "io-matrix")
FAULT_KINDS = ("parametric-scale", "additive-step", "sensor-bias", "none")
SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    plant: StateSpaceModel | AdditiveModel
    scheme: str
    uncertainty_kind: str = "right-coprime"
    uncertainty_magnitude: float = 0.0
    seed: int = 0
    fault_kind: str = "none"
    fault_onset: int = 0
    fault_magnitude: float = 0.0
    horizon: int = 200
    trials: int = 1
    loop_b: float = 0.05
    expect: dict = field(default_factory=dict)
    # optional: stable Youla parameter for the loop schemes
    q_param: StateSpaceModel | None = None
    # optional: explicit class registry for the classify scheme
    classes: tuple = ()

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DimensionError(f"unknown scheme {self.scheme!r}")
        if self.uncertainty_kind not in UNCERTAINTY_KINDS:
            raise DimensionError(f"unknown uncertainty kind {self.uncertainty_kind!r}")
        if self.fault_kind not in FAULT_KINDS:
            raise DimensionError(f"unknown fault kind {self.fault_kind!r}")
        if not 0.0 <= self.uncertainty_magnitude < 1.0:
            raise DimensionError("uncertainty magnitude must lie in [0, 1)")
        if self.horizon < 1 or self.trials < 1:
            raise DimensionError("horizon and trials must be at least 1")

    @property
    def base_plant(self) -> StateSpaceModel:
        return self.plant.base if isinstance(self.plant, AdditiveModel) else self.plant

    def digest(self) -> dict:
        plant_json = self.plant.to_json()
        out = {
            "schema": SCHEMA_VERSION,
            "plant": plant_json,
            "scheme": self.scheme,
            "uncertainty": {"kind": self.uncertainty_kind,
                            "magnitude": self.uncertainty_magnitude,
                            "seed": self.seed},
            "fault": {"kind": self.fault_kind, "onset_index": self.fault_onset,
                      "magnitude": self.fault_magnitude},
            "horizon": self.horizon,
            "trials": self.trials,
            "loop_b": self.loop_b,
        }
        if self.q_param is not None:
            out["controller"] = {"Q": self.q_param.to_json()}
        if self.classes:
            out["classes"] = [c.to_json() for c in self.classes]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioConfig":
        if obj.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise DimensionError(f"unsupported config schema {obj.get('schema')!r}")
        plant_obj = obj["plant"]
        if "E_d" in plant_obj:
            plant = AdditiveModel.from_json(plant_obj)
        else:
            plant = StateSpaceModel.from_json(plant_obj)
        unc = obj.get("uncertainty", {})
        fault = obj.get("fault", {})
        q_param = None
        if obj.get("controller", {}).get("Q") is not None:
            q_param = StateSpaceModel.from_json(obj["controller"]["Q"])
        classes = tuple(
            FaultClassModel.from_json(c) for c in obj.get("classes", []))
        return cls(
            plant=plant,
            scheme=obj["scheme"],
            uncertainty_kind=unc.get("kind", "right-coprime"),
            uncertainty_magnitude=float(unc.get("magnitude", 0.0)),
            seed=int(unc.get("seed", 0)),
            fault_kind=fault.get("kind", "none"),
            fault_onset=int(fault.get("onset_index", 0)),
            fault_magnitude=float(fault.get("magnitude", 0.0)),
            horizon=int(obj.get("horizon", 200)),
            trials=int(obj.get("trials", 1)),
            loop_b=float(obj.get("loop_b", 0.05)),
            expect=dict(obj.get("expect", {})),
            q_param=q_param,
            classes=classes,
        )


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ScenarioConfig.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# random systems and uncertainty injection
# ---------------------------------------------------------------------------

def random_stable_system(rng: np.random.Generator, n: int, p: int, m: int,
                         rho_range=(0.1, 0.8), gain: float = 1.0) -> StateSpaceModel:
    """Random Schur system; pole radius uniform in rho_range."""
    if n == 0:
        return constant_model(gain * rng.standard_normal((m, p)))
    A = rng.standard_normal((n, n))
    rho = spectral_radius(A)
    target = rng.uniform(*rho_range)
    A = A * (target / max(rho, 1e-12))
    return StateSpaceModel(A, rng.standard_normal((n, p)),
                           gain * rng.standard_normal((m, n)),
                           gain * 0.3 * rng.standard_normal((m, p)))


@dataclass(frozen=True, eq=False)
class UncertaintyDraw:
    """Scaled perturbation factors with their certified composite norm."""

    kind: str
    delta_den: StateSpaceModel    # Delta_M (right) or Delta_Mhat (left)
    delta_num: StateSpaceModel    # Delta_N (right) or Delta_Nhat (left)
    norm: float

    @property
    def stacked(self) -> StateSpaceModel:
        if self.kind == "right-coprime":
            return stack_outputs(self.delta_den, self.delta_num)
        return stack_inputs(StateSpaceModel(self.delta_num.A, self.delta_num.B,
                                            -self.delta_num.C, -self.delta_num.D),
                            self.delta_den)


def inject_uncertainty(rep: NormalizedRepresentation, kind: str, magnitude: float,
                       seed) -> UncertaintyDraw:
    """Random stable factor perturbation with composite norm == magnitude.

    Deterministic per seed; the blocks are 2-state systems, jointly scaled by
    one exact factor so the stacked perturbation norm equals magnitude within
    the H-infinity solver tolerance.
    """
    if not 0.0 <= magnitude < 1.0:
        raise DimensionError("magnitude must lie in [0, 1)")
    p, m = rep.plant.p, rep.plant.m
    rng = np.random.default_rng(seed)
    if kind == "right-coprime":
        shapes = ((p, p), (m, p))
    elif kind == "left-coprime":
        shapes = ((m, m), (m, p))
    else:
        raise DimensionError(f"inject_uncertainty does not handle kind {kind!r}")
    for _ in range(10):
        d_den = random_stable_system(rng, 2, shapes[0][1], shapes[0][0])
        d_num = random_stable_system(rng, 2, shapes[1][1], shapes[1][0])
        draw = UncertaintyDraw(kind, d_den, d_num, 0.0)
        if magnitude == 0.0:
            zden = constant_model(np.zeros(shapes[0]))
            znum = constant_model(np.zeros(shapes[1]))
            return UncertaintyDraw(kind, zden, znum, 0.0)
        nrm = hinf_norm(draw.stacked, 1e-7)
        if nrm > 1e-8:
            c = magnitude / nrm
            d_den = StateSpaceModel(d_den.A, d_den.B, c * d_den.C, c * d_den.D)
            d_num = StateSpaceModel(d_num.A, d_num.B, c * d_num.C, c * d_num.D)
            return UncertaintyDraw(kind, d_den, d_num, magnitude)
    raise ProjFdiError("failed to draw a non-degenerate perturbation")


def io_matrix_uncertainty(rng: np.random.Generator, io, magnitude: float):
    """(Delta_x, Delta_u) with the whitened composite spectral norm == magnitude."""
    dx = rng.standard_normal((io.output_len, io.past_len))
    du = rng.standard_normal((io.output_len, io.window_len))
    dk = io.sigma_inv_half @ np.hstack([-dx, -du,
                                        np.zeros((io.output_len, io.output_len))])
    s0 = float(np.linalg.svd(dk, compute_uv=False)[0])
    c = magnitude / max(s0, 1e-300)
    return c * dx, c * du


# ---------------------------------------------------------------------------
# fault injection helpers
# ---------------------------------------------------------------------------

def _faulted_plant(plant: StateSpaceModel, kind: str, magnitude: float) -> StateSpaceModel:
    if kind == "parametric-scale":
        return StateSpaceModel(plant.A, (1.0 + magnitude) * plant.B,
                               plant.C, (1.0 + magnitude) * plant.D)
    return plant


def simulate_with_fault(plant: StateSpaceModel, u: SignalWindow, kind: str,
                        onset: int, magnitude: float) -> SignalWindow:
    """Open-loop response with the fault active from the onset index on."""
    post = _faulted_plant(plant, kind, magnitude)
    x = np.zeros(plant.n)
    ys = np.empty((u.length, plant.m))
    for i in range(u.length):
        k = u.start_index + i
        g = plant if (kind == "none" or k < onset) else post
        uk = u.samples[i].copy()
        if kind == "additive-step" and k >= onset:
            uk = uk + magnitude
        ys[i] = g.C @ x + g.D @ uk
        if kind == "sensor-bias" and k >= onset:
            ys[i] = ys[i] + magnitude
        x = g.A @ x + g.B @ uk
    return SignalWindow(ys, u.start_index)


def loop_data_with_fault(plant: StateSpaceModel, ctrl: ControllerRealization,
                         v: SignalWindow, kind: str, onset: int, magnitude: float):
    """Closed-loop data with the fault active from the onset index on."""
    if kind in ("none", "sensor-bias"):
        noise = None
        if kind == "sensor-bias":
            rows = np.zeros((v.length, plant.m))
            rows[max(onset - v.start_index, 0):] = magnitude
            noise = SignalWindow(rows, v.start_index)
        return settled_loop_data(plant, ctrl, v, y_noise=noise)
    post = _faulted_plant(plant, kind, magnitude)
    K = ctrl.realization
    ext_src = post if kind == "parametric-scale" else plant
    rho = max(spectral_radius(plant.A) if plant.n else 0.0, 0.1)
    ext = int(np.ceil(np.log(1e-12) / np.log(max(rho, 0.5))))
    v = v.restrict(v.start_index, v.end_index + ext + 4 * (plant.n + K.n + 8))
    xg = np.zeros(plant.n)
    xk = np.zeros(K.n)
    us = np.empty((v.length, plant.p))
    ys = np.empty((v.length, plant.m))
    for i in range(v.length):
        k = v.start_index + i
        g = plant if k < onset else post
        E = np.eye(plant.p) - K.D @ g.D
        u = np.linalg.solve(E, K.C @ xk + K.D @ (g.C @ xg) + v.samples[i])
        if kind == "additive-step" and k >= onset:
            u_plant = u + magnitude
        else:
            u_plant = u
        y = g.C @ xg + g.D @ u_plant
        us[i] = u
        ys[i] = y
        xg = g.A @ xg + g.B @ u_plant
        xk = K.A @ xk + K.B @ y
    return SignalWindow(us, v.start_index), SignalWindow(ys, v.start_index)


def _white(rng: np.random.Generator, length: int, ch: int) -> SignalWindow:
    return SignalWindow(rng.standard_normal((length, ch)), 0)


def _settle_extension(model: StateSpaceModel, amplitude_tol: float = 1e-12) -> int:
    rho = spectral_radius(model.A) if model.n else 0.0
    if rho <= 0.0:
        return 1
    return min(20_000, int(np.ceil(np.log(amplitude_tol) / np.log(rho))))


# ---------------------------------------------------------------------------
# per-scheme trial runners
# ---------------------------------------------------------------------------

class _OpenLoopRunner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.rep = normalized_gains(cfg.base_plant)
        self.engine = engine_for(self.rep)

    def run(self, trial: int, rng: np.random.Generator) -> ThresholdReport:
        cfg = self.cfg
        delta = cfg.uncertainty_magnitude
        if delta > 0.0:
            frac = rng.uniform(0.1, 0.995)
            draw = inject_uncertainty(self.rep, "right-coprime", frac * delta,
                                      rng.integers(1 << 32))
            plant = perturbed_plant(self.rep, draw.delta_den, draw.delta_num)
        else:
            plant = cfg.base_plant
        u = _white(rng, cfg.horizon, plant.p)
        ext = _settle_extension(plant)
        u = u.restrict(0, cfg.horizon - 1 + ext)
        y = simulate_with_fault(plant, u, cfg.fault_kind, cfg.fault_onset,
                                cfg.fault_magnitude)
        dec = self.engine.decompose(stack_windows(u, y))
        d = delta if delta > 0 else 1e-6
        return adaptive_threshold(d, dec.data_norm_sq, dec.total_norm_sq,
                                  dec.truncation_bound)


class _KernelRunner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        if isinstance(cfg.plant, AdditiveModel):
            self.additive = cfg.plant
            self.nd0, self.L_d, self.W_d, _ = disturbance_factor(cfg.plant)
            self.nf = cfg.plant.fault_model(self.L_d, self.W_d)
        else:
            self.additive = None
            self.rep = normalized_gains(cfg.base_plant)
            self.engine = engine_for(self.rep)

    def run(self, trial: int, rng: np.random.Generator) -> ThresholdReport:
        cfg = self.cfg
        if self.additive is not None:
            return self._run_unified(rng)
        delta = cfg.uncertainty_magnitude
        if delta > 0.0:
            frac = rng.uniform(0.1, 0.995)
            draw = inject_uncertainty(self.rep, "left-coprime", frac * delta,
                                      rng.integers(1 << 32))
            Mh = parallel(self.rep.skr.denominator, draw.delta_den)
            Nh = parallel(self.rep.skr.numerator, draw.delta_num)
            plant = series(inverse(Mh), Nh)
            if plant.n and not is_schur(plant.A):
                raise ProjFdiError("perturbed plant unstable; reduce magnitude")
        else:
            plant = cfg.base_plant
        u = _white(rng, cfg.horizon, plant.p)
        ext = _settle_extension(plant)
        u = u.restrict(0, cfg.horizon - 1 + ext)
        y = simulate_with_fault(plant, u, cfg.fault_kind, cfg.fault_onset,
                                cfg.fault_magnitude)
        w = stack_windows(u, y)
        r0_sq, _ = self.engine.kernel_energy(w)
        d = delta if delta > 0 else 1e-6
        return kernel_scheme_threshold(d, w.energy(), r0_sq)

    def _run_unified(self, rng: np.random.Generator) -> ThresholdReport:
        cfg = self.cfg
        am = self.additive
        d = _white(rng, cfg.horizon, am.k_d)
        d = d.scaled(rng.uniform(0.1, 0.999) * am.delta_d / max(d.norm(), 1e-300))
        ext = _settle_extension(self.nd0)
        d_ext = d.restrict(0, cfg.horizon - 1 + ext)
        rbar = simulate(self.nd0, d_ext)
        if cfg.fault_kind != "none":
            f = np.zeros((d_ext.length, am.k_f))
            f[max(cfg.fault_onset, 0):] = cfg.fault_magnitude
            rbar_f = simulate(self.nf, SignalWindow(f, 0))
            rbar = rbar + rbar_f
        J = rbar.norm()
        J_th = am.delta_d
        verdict = "faulty" if J > J_th else "fault-free"
        # normalized against the disturbance bound: fault-free iff J_N <= 1
        JN = J / max(am.delta_d, 1e-300)
        return ThresholdReport(J=J, J_th=J_th, J_N=JN, J_thN=1.0,
                               delta=am.delta_d, verdict=verdict)


class _LoopRunner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.rep = normalized_gains(cfg.base_plant)
        self.bez = bezout_complements(cfg.base_plant, self.rep.F0, self.rep.L0,
                                      self.rep.V0, self.rep.W0)
        q = cfg.q_param if cfg.q_param is not None else \
            constant_model(np.zeros((cfg.base_plant.p, cfg.base_plant.m)))
        self.ctrl = youla_controller(self.rep, self.bez, q)
        if cfg.scheme == "closed-A":
            self.detector = SchemeADetector(self.ctrl, cfg.loop_b)
        else:
            self.clsir = closed_loop_sir_build(self.rep)

    def run(self, trial: int, rng: np.random.Generator) -> ThresholdReport:
        cfg = self.cfg
        b = cfg.loop_b
        if cfg.uncertainty_magnitude > 0.0:
            frac = rng.uniform(0.1, 0.95)
            for _ in range(10):
                draw = inject_uncertainty(self.rep, "right-coprime", 0.5,
                                          rng.integers(1 << 32))
                blocks = loop_uncertainty_blocks(self.ctrl, draw.delta_den,
                                                 draw.delta_num)
                nrm = hinf_norm(blocks["delta_ic"], 1e-6)
                if nrm > 1e-8:
                    c = frac * b / nrm
                    dm = StateSpaceModel(draw.delta_den.A, draw.delta_den.B,
                                         c * draw.delta_den.C, c * draw.delta_den.D)
                    dn = StateSpaceModel(draw.delta_num.A, draw.delta_num.B,
                                         c * draw.delta_num.C, c * draw.delta_num.D)
                    break
            plant = perturbed_plant(self.rep, dm, dn)
        else:
            plant = cfg.base_plant
        v = _white(rng, cfg.horizon, plant.p)
        u, y = loop_data_with_fault(plant, self.ctrl, v, cfg.fault_kind,
                                    cfg.fault_onset, cfg.fault_magnitude)
        if cfg.scheme == "closed-A":
            r, J_th = self.detector.evaluate(u, y)
        else:
            vv = v.restrict(0, u.end_index)
            vhat = simulate(self.ctrl.vhat0, vv)
            r, J_th = scheme_b_residual(self.clsir, vhat, u, y, b, self.ctrl.gamma)
        data_sq = u.energy() + y.energy()
        JN = r / math.sqrt(data_sq) if data_sq > 0 else 0.0
        JthN = J_th / math.sqrt(data_sq) if data_sq > 0 else 0.0
        verdict = "faulty" if r > J_th else "fault-free"
        return ThresholdReport(J=r, J_th=J_th, J_N=JN, J_thN=JthN,
                               delta=b, verdict=verdict)


def default_parity_model(plant: StateSpaceModel):
    """Stacked I/O model with the default gain choice: deadbeat when the
    plant has one output (exact reconstruction at s_p = n), the normalized
    filter gain otherwise."""
    n = max(plant.n, 1)
    if plant.m == 1 and plant.n:
        K = deadbeat_observer_gain(plant)
    else:
        K = normalized_gains(plant).L0
    return build_io_model(plant, K, s=n, s_p=n)


class _ParityRunner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.io = default_parity_model(cfg.base_plant)

    def run(self, trial: int, rng: np.random.Generator) -> ThresholdReport:
        cfg = self.cfg
        io = self.io
        delta = cfg.uncertainty_magnitude if cfg.uncertainty_magnitude > 0 else 1e-6
        z_p = rng.standard_normal(io.past_len)
        u_s = rng.standard_normal(io.window_len)
        theta = io.theta
        if cfg.uncertainty_magnitude > 0.0:
            frac = rng.uniform(0.05, 0.995)
            dx, du = io_matrix_uncertainty(rng, io, frac * cfg.uncertainty_magnitude)
            y_s = (io.Gamma_s @ io.L_p + dx) @ z_p + (io.H_us + du) @ u_s
        else:
            y_s = theta @ np.concatenate([z_p, u_s])
        if cfg.fault_kind != "none":
            bias = np.zeros(io.output_len)
            if cfg.fault_kind == "sensor-bias":
                bias[:] = cfg.fault_magnitude
            elif cfg.fault_kind == "additive-step":
                bias[:] = cfg.fault_magnitude
            else:  # parametric-scale on the input path
                y_s = y_s + cfg.fault_magnitude * (io.H_us @ u_s)
            y_s = y_s + bias
        _, r_norm = parity_residual(io, z_p, u_s, y_s)
        return io_threshold(delta, z_p, u_s, y_s, r_norm)


class _ClassifyRunner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        if cfg.classes:
            self.classes = list(cfg.classes)
            return
        plant = cfg.base_plant
        scale = cfg.fault_magnitude if cfg.fault_magnitude else 0.5
        faulted = _faulted_plant(plant, "parametric-scale", scale)
        delta = cfg.uncertainty_magnitude if cfg.uncertainty_magnitude > 0 else 0.05
        self.classes = [
            FaultClassModel("nominal", normalized_gains(plant), delta),
            FaultClassModel("scaled", normalized_gains(faulted), delta),
        ]

    def run(self, trial: int, rng: np.random.Generator):
        cfg = self.cfg
        target = 0 if cfg.fault_kind == "none" else min(1, len(self.classes) - 1)
        rep = self.classes[target].rep
        from .projection import image_data
        v = _white(rng, cfg.horizon, rep.plant.p)
        w, _ = image_data(rep.image_model, v, tail_tol=1e-18)
        u = SignalWindow(w.samples[:, :rep.plant.p], 0)
        y = SignalWindow(w.samples[:, rep.plant.p:], 0)
        verdict = multiclass_classify(self.classes, u, y)
        expected = self.classes[target].label
        correct = verdict.decision == "single" and verdict.labels == (expected,)
        return verdict, correct


_RUNNERS = {
    "open-loop": _OpenLoopRunner,
    "kernel-L2": _KernelRunner,
    "closed-A": _LoopRunner,
    "closed-B": _LoopRunner,
    "parity": _ParityRunner,
    "classify": _ClassifyRunner,
}


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DetectionReport:
    scenario: dict
    per_trial: tuple
    summary: dict
    errors: tuple = ()

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "summary": self.summary,
            "per_trial": [t.to_json() for t in self.per_trial],
            "errors": list(self.errors),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), default=_format_float)

    def to_csv(self) -> str:
        import csv as _csv
        import io as _io
        buf = _io.StringIO()
        writer = _csv.writer(buf, lineterminator="\n")
        first = self.per_trial[0] if self.per_trial else None
        if isinstance(first, ThresholdReport) or first is None:
            writer.writerow(["trial", "J", "J_th", "J_N", "J_thN", "delta", "verdict"])
            for i, t in enumerate(self.per_trial):
                writer.writerow([i, _f17(t.J), _f17(t.J_th), _f17(t.J_N),
                                 _f17(t.J_thN), _f17(t.delta), t.verdict])
        else:
            writer.writerow(["trial", "decision", "labels"])
            for i, t in enumerate(self.per_trial):
                writer.writerow([i, t.decision, "|".join(t.labels)])
        return buf.getvalue()


def _f17(x: float) -> str:
    return format(float(x), ".17g")


def _format_float(obj):
    raise TypeError(f"not JSON serializable: {obj!r}")


def run_scenario(cfg: ScenarioConfig) -> DetectionReport:
    """Execute all trials and aggregate rates; deterministic for fixed seeds."""
    runner = _RUNNERS[cfg.scheme](cfg)
    results: list = [None] * cfg.trials
    errors: list = []

    def one(i: int):
        rng = np.random.default_rng((cfg.seed, i))
        return runner.run(i, rng)

    threads = int(os.environ.get("PROJFDI_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {i: pool.submit(one, i) for i in range(cfg.trials)}
            for i in range(cfg.trials):
                try:
                    results[i] = futs[i].result()
                except ProjFdiError as exc:
                    errors.append({"trial": i, "error": str(exc)})
    else:
        for i in range(cfg.trials):
            try:
                results[i] = one(i)
            except ProjFdiError as exc:
                errors.append({"trial": i, "error": str(exc)})

    done = [r for r in results if r is not None]
    summary: dict = {"complete": len(errors) == 0, "trials_done": len(done)}
    if cfg.scheme == "classify":
        verdicts = tuple(r[0] for r in done)
        correct = sum(1 for r in done if r[1])
        summary["detection_rate"] = correct / max(len(done), 1)
        summary["false_alarm_rate"] = (
            0.0 if cfg.fault_kind != "none"
            else 1.0 - correct / max(len(done), 1))
        per_trial = verdicts
    else:
        per_trial = tuple(done)
        flagged = sum(1 for t in done if t.faulty)
        if cfg.fault_kind == "none":
            summary["false_alarm_rate"] = flagged / max(len(done), 1)
            summary["detection_rate"] = 0.0
        else:
            summary["detection_rate"] = flagged / max(len(done), 1)
            summary["false_alarm_rate"] = 0.0
        ratios = [t.J_N / t.J_thN for t in done if t.J_thN > 0]
        summary["mean_ratio"] = sum(ratios) / len(ratios) if ratios else 0.0
    return DetectionReport(scenario=cfg.digest(), per_trial=per_trial,
                           summary=summary, errors=tuple(errors))


def benchmark_plant() -> StateSpaceModel:
    """Fixed three-state benchmark: cascaded first-order lags with coupling.

    A stand-in fixture validated for stability, observability and
    controllability; all values live in data/benchmark_plant.json.
    """
    with resources.files("projfdi.data").joinpath("benchmark_plant.json").open() as fh:
        return StateSpaceModel.from_json(json.load(fh))


def export_report(report: DetectionReport, path: str, format: str = "json",
                  plots: bool = False) -> list[str]:
    """Write the report to path; optionally render figures next to it.

    Returns the list of files written.  JSON floats use repr round-trip
    formatting; CSV floats use 17 significant digits.
    """
    written = [path]
    try:
        if format == "json":
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(report.dumps())
        elif format == "csv":
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(report.to_csv())
        else:
            raise DimensionError(f"unknown report format {format!r}")
    except OSError as exc:
        raise ProjFdiError(f"cannot write report to {path}: {exc}") from exc
    if plots:
        from .plots import render_report_figures
        written += render_report_figures(report, path)
    return written
