"""Harness: determinism, uncertainty scaling, reports, CLI, figures."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from projfdi.additive import AdditiveModel
from projfdi.exceptions import DimensionError, ProjFdiError
from projfdi.harness import (ScenarioConfig, export_report,
                             inject_uncertainty, random_stable_system,
                             run_scenario)
from projfdi.norms import hinf_norm
from projfdi.riccati import dare_residual
from projfdi.statespace import (StateSpaceModel, is_schur,
                                observability_matrix, spectral_radius)


@pytest.fixture(scope="module")
def base_cfg(bench):
    return ScenarioConfig(plant=bench, scheme="open-loop",
                          uncertainty_magnitude=0.2, seed=11,
                          horizon=80, trials=6)


class TestBenchmarkPlant:
    def test_schur(self, bench):
        assert is_schur(bench.A)

    def test_observable_and_controllable(self, bench):
        assert np.linalg.matrix_rank(observability_matrix(bench)) == bench.n

    def test_riccati_residual(self, bench, bench_rep):
        res = dare_residual(bench.A.T, bench.C.T, bench.B @ bench.B.T,
                            np.eye(1) + bench.D @ bench.D.T,
                            bench.B @ bench.D.T, bench_rep.riccati_P)
        assert res <= 1e-10 * (1 + np.linalg.norm(bench_rep.riccati_P))


class TestInjectUncertainty:
    def test_zero_magnitude_unperturbed(self, bench_rep):
        draw = inject_uncertainty(bench_rep, "right-coprime", 0.0, 5)
        assert hinf_norm(draw.stacked) == 0.0

    @pytest.mark.parametrize("kind", ["right-coprime", "left-coprime"])
    def test_norm_scaling(self, bench_rep, kind):
        draw = inject_uncertainty(bench_rep, kind, 0.2, 7)
        nrm = hinf_norm(draw.stacked, 1e-7)
        assert 0.1999 <= nrm <= 0.2001

    def test_distinct_seeds_same_norm(self, bench_rep):
        d1 = inject_uncertainty(bench_rep, "right-coprime", 0.2, 1)
        d2 = inject_uncertainty(bench_rep, "right-coprime", 0.2, 2)
        assert not np.allclose(d1.delta_num.D, d2.delta_num.D)
        n1 = hinf_norm(d1.stacked, 1e-7)
        n2 = hinf_norm(d2.stacked, 1e-7)
        assert abs(n1 - n2) <= 5e-4

    def test_pole_radius_convention(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            g = random_stable_system(rng, 2, 1, 1)
            assert spectral_radius(g.A) <= 0.8 + 1e-12


class TestRunScenario:
    def test_deterministic_reports(self, base_cfg):
        a = run_scenario(base_cfg)
        b = run_scenario(base_cfg)
        assert a.dumps() == b.dumps()

    def test_thread_count_does_not_change_results(self, base_cfg):
        a = run_scenario(base_cfg)
        os.environ["PROJFDI_THREADS"] = "3"
        try:
            b = run_scenario(base_cfg)
        finally:
            del os.environ["PROJFDI_THREADS"]
        assert a.dumps() == b.dumps()

    def test_rate_accounting(self, base_cfg):
        rep = run_scenario(base_cfg)
        flagged = sum(1 for t in rep.per_trial if t.faulty)
        assert flagged + sum(1 for t in rep.per_trial if not t.faulty) \
            == base_cfg.trials
        assert np.isclose(rep.summary["false_alarm_rate"],
                          flagged / base_cfg.trials)

    def test_degenerate_single_trial(self, bench):
        cfg = ScenarioConfig(plant=bench, scheme="open-loop", horizon=1,
                             trials=1, seed=0)
        rep = run_scenario(cfg)
        assert rep.summary["trials_done"] == 1
        assert len(rep.per_trial) == 1

    def test_additive_plant_unified_route(self, bench):
        am = AdditiveModel(bench, E_d=[[1.0], [0.0], [0.0]], F_d=[[0.5]],
                           E_f=[[0.0], [1.0], [0.0]], F_f=[[0.0]],
                           delta_d=2.0)
        cfg = ScenarioConfig(plant=am, scheme="kernel-L2", seed=4,
                             horizon=60, trials=5)
        rep = run_scenario(cfg)
        assert rep.summary["false_alarm_rate"] == 0.0
        cfg_f = ScenarioConfig(plant=am, scheme="kernel-L2", seed=4,
                               horizon=60, trials=5, fault_kind="additive-step",
                               fault_onset=10, fault_magnitude=4.0)
        rep_f = run_scenario(cfg_f)
        assert rep_f.summary["detection_rate"] == 1.0

    def test_config_json_round_trip(self, base_cfg):
        obj = base_cfg.digest()
        back = ScenarioConfig.from_json(obj)
        assert back.digest() == obj

    def test_bad_scheme_rejected(self, bench):
        with pytest.raises(DimensionError):
            ScenarioConfig(plant=bench, scheme="nonsense")


class TestExport:
    def test_json_round_trip_identical(self, base_cfg, tmp_path):
        rep = run_scenario(base_cfg)
        path = str(tmp_path / "report.json")
        export_report(rep, path, "json")
        text1 = open(path).read()
        export_report(rep, path, "json")
        assert open(path).read() == text1
        obj = json.loads(text1)
        assert obj["summary"] == rep.summary

    def test_csv_row_count(self, base_cfg, tmp_path):
        rep = run_scenario(base_cfg)
        path = str(tmp_path / "report.csv")
        export_report(rep, path, "csv")
        lines = open(path).read().splitlines()
        assert len(lines) == base_cfg.trials + 1
        assert lines[0] == "trial,J,J_th,J_N,J_thN,delta,verdict"

    def test_malformed_path(self, base_cfg):
        rep = run_scenario(base_cfg)
        with pytest.raises(ProjFdiError):
            export_report(rep, "/nonexistent-dir/report.json", "json")

    def test_figures_rendered_alongside(self, base_cfg, tmp_path):
        rep = run_scenario(base_cfg)
        path = str(tmp_path / "mc.csv")
        files = export_report(rep, path, "csv", plots=True)
        assert str(tmp_path / "mc_residuals.png") in files
        assert str(tmp_path / "mc_margins.png") in files
        for f in files:
            assert os.path.exists(f)

    def test_classify_figures(self, bench, tmp_path):
        cfg = ScenarioConfig(plant=bench, scheme="classify", seed=2,
                             horizon=40, trials=3, uncertainty_magnitude=0.05,
                             fault_kind="parametric-scale", fault_magnitude=0.8)
        rep = run_scenario(cfg)
        path = str(tmp_path / "cls.json")
        files = export_report(rep, path, "json", plots=True)
        assert str(tmp_path / "cls_decisions.png") in files


def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "projfdi", *args],
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


class TestCli:
    def test_bench_and_factorize(self, tmp_path):
        plant_path = str(tmp_path / "plant.json")
        code, _, _ = _cli("bench", "--out", plant_path)
        assert code == 0
        rep_path = str(tmp_path / "rep.json")
        code, _, _ = _cli("factorize", "--plant", plant_path, "--out", rep_path)
        assert code == 0
        obj = json.load(open(rep_path))
        assert obj["checks"]["skr_normalization"] < 1e-8

    def test_gap_self_is_zero(self, tmp_path):
        plant_path = str(tmp_path / "plant.json")
        _cli("bench", "--out", plant_path)
        code, out, _ = _cli("gap", "--plant-a", plant_path,
                            "--plant-b", plant_path)
        assert code == 0
        assert json.loads(out)["gap"] <= 1e-6

    def test_montecarlo_expectation_pass_and_fail(self, bench, tmp_path):
        cfg = {
            "schema": 1,
            "plant": bench.to_json(),
            "scheme": "open-loop",
            "uncertainty": {"kind": "right-coprime", "magnitude": 0.2, "seed": 3},
            "fault": {"kind": "none", "onset_index": 0, "magnitude": 0.0},
            "horizon": 60, "trials": 4,
            "expect": {"false_alarm_rate_max": 0.0},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_path = str(tmp_path / "out.csv")
        code, _, _ = _cli("montecarlo", "--config", str(cfg_path),
                          "--out", out_path, "--plots")
        assert code == 0
        assert os.path.exists(str(tmp_path / "out_residuals.png"))
        # impossible expectation: detection of a nonexistent fault
        cfg["expect"] = {"detection_rate_min": 0.5}
        cfg_path.write_text(json.dumps(cfg))
        code, _, _ = _cli("montecarlo", "--config", str(cfg_path))
        assert code == 1

    def test_scheme_family_mismatch(self, bench, tmp_path):
        cfg = {"schema": 1, "plant": bench.to_json(), "scheme": "open-loop",
               "horizon": 10, "trials": 1}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        code, _, _ = _cli("parity", "--config", str(cfg_path))
        assert code == 2

    def test_bad_config_is_exit_2(self, tmp_path):
        cfg_path = tmp_path / "broken.json"
        cfg_path.write_text("{not json")
        code, _, err = _cli("detect", "--config", str(cfg_path))
        assert code == 2


class TestLogInterfaces:
    def test_log_round_trip(self, bench):
        from projfdi.parity import read_log_csv, write_log_csv
        from projfdi.signals import SignalWindow
        from projfdi.statespace import simulate
        rng = np.random.default_rng(21)
        u = SignalWindow(rng.standard_normal((40, 1)), -5)
        y = simulate(bench, u)
        u2, y2 = read_log_csv(write_log_csv(u, y))
        assert u2.start_index == -5
        assert np.array_equal(u2.samples, u.samples)
        assert np.array_equal(y2.samples, y.samples)

    def test_sliding_detection_schema(self, bench):
        from projfdi.harness import default_parity_model
        from projfdi.parity import sliding_detection_csv
        from projfdi.signals import SignalWindow
        from projfdi.statespace import simulate
        rng = np.random.default_rng(22)
        u = SignalWindow(rng.standard_normal((60, 1)), 0)
        y = simulate(bench, u)
        io = default_parity_model(bench)
        text = sliding_detection_csv(u, y, io, 0.1)
        lines = text.splitlines()
        assert lines[0] == "k,r_norm,J_th,verdict"
        assert len(lines) == 60 - (io.s + io.s_p) + 1
        assert all(l.endswith("fault-free") for l in lines[1:])

    def test_sliding_detection_flags_bias_onset(self, bench):
        from projfdi.harness import default_parity_model
        from projfdi.parity import sliding_detection
        from projfdi.signals import SignalWindow
        from projfdi.statespace import simulate
        rng = np.random.default_rng(23)
        u = SignalWindow(rng.standard_normal((100, 1)), 0)
        y = simulate(bench, u).samples.copy()
        y[60:] += 2.0
        io = default_parity_model(bench)
        rows = list(sliding_detection(u, SignalWindow(y, 0), io, 0.1))
        first = next(k for k, _, _, v in rows if v == "faulty")
        assert first == 60
        assert all(v == "fault-free" for k, _, _, v in rows if k < 60)


class TestConfigExtensions:
    def test_controller_parameter_round_trip(self, bench):
        q = StateSpaceModel([[0.2]], [[1.0]], [[0.3]], [[0.1]])
        cfg = ScenarioConfig(plant=bench, scheme="closed-A", seed=1,
                             horizon=40, trials=2, uncertainty_magnitude=0.02,
                             q_param=q)
        back = ScenarioConfig.from_json(cfg.digest())
        assert back.q_param is not None
        assert np.array_equal(back.q_param.A, q.A)
        rep = run_scenario(back)
        assert rep.summary["false_alarm_rate"] == 0.0

    def test_class_registry_round_trip(self, bench):
        from projfdi.classification import FaultClassModel
        from projfdi.factorization import normalized_gains
        scaled = StateSpaceModel(bench.A, 2.0 * bench.B, bench.C, bench.D)
        classes = (FaultClassModel("ok", normalized_gains(bench), 0.05),
                   FaultClassModel("bad", normalized_gains(scaled), 0.05))
        cfg = ScenarioConfig(plant=bench, scheme="classify", seed=2,
                             horizon=40, trials=3, classes=classes,
                             fault_kind="parametric-scale", fault_magnitude=1.0)
        back = ScenarioConfig.from_json(cfg.digest())
        assert len(back.classes) == 2
        rep = run_scenario(back)
        assert rep.summary["detection_rate"] == 1.0
