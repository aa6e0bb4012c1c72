"""Command line interface.

Subcommands read one JSON config and write JSON/CSV results (figures on
request).  Exit codes: 0 success, 1 detection-assertion failure (an
`expect` block in the config was violated), 2 configuration or structural
error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .exceptions import ProjFdiError
from .factorization import (bezout_complements, normalized_gains,
                            skr_normalization_deviation,
                            sir_normalization_deviation, verify_bezout)
from .gap import gap
from .harness import (DetectionReport, ScenarioConfig, benchmark_plant,
                      export_report, load_config, run_scenario)
from .statespace import StateSpaceModel
from .thresholds import ThresholdReport

__all__ = ["main"]


def _load_plant(path: str) -> StateSpaceModel:
    with open(path, "r", encoding="utf-8") as fh:
        return StateSpaceModel.from_json(json.load(fh))


def _write_json(obj: dict, path: str | None):
    text = json.dumps(obj, indent=1)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_factorize(args) -> int:
    plant = _load_plant(args.plant)
    rep = normalized_gains(plant)
    bez = bezout_complements(plant, rep.F0, rep.L0, rep.V0, rep.W0)
    out = rep.to_json()
    out["checks"] = {
        "skr_normalization": skr_normalization_deviation(rep),
        "sir_normalization": sir_normalization_deviation(rep),
        "bezout_deviation": verify_bezout(bez, rep.skr, rep.sir),
    }
    _write_json(out, args.out)
    return 0


def _cmd_gap(args) -> int:
    rep_a = normalized_gains(_load_plant(args.plant_a))
    rep_b = normalized_gains(_load_plant(args.plant_b))
    res = gap(rep_a, rep_b, tol=args.tol)
    _write_json(res.to_json(), args.out)
    return 0


def _check_expectations(cfg: ScenarioConfig, report: DetectionReport) -> int:
    exp = cfg.expect
    summary = report.summary
    if not summary.get("complete", True) and exp:
        return 1
    if "false_alarm_rate_max" in exp and \
            summary.get("false_alarm_rate", 0.0) > exp["false_alarm_rate_max"]:
        return 1
    if "detection_rate_min" in exp and \
            summary.get("detection_rate", 0.0) < exp["detection_rate_min"]:
        return 1
    return 0


def _run_and_export(args, allowed_schemes=None) -> int:
    cfg = load_config(args.config)
    if allowed_schemes and cfg.scheme not in allowed_schemes:
        print(f"config scheme {cfg.scheme!r} not valid here "
              f"(expected one of {allowed_schemes})", file=sys.stderr)
        return 2
    report = run_scenario(cfg)
    files = []
    if args.out:
        fmt = "csv" if args.out.endswith(".csv") else "json"
        files = export_report(report, args.out, format=fmt, plots=args.plots)
    if report.per_trial and isinstance(report.per_trial[0], ThresholdReport):
        print(ThresholdReport.table_header())
        for t in report.per_trial[:args.print_rows]:
            print(t.table_row())
    print("summary:", json.dumps(report.summary))
    if files:
        print("wrote:", ", ".join(files))
    return _check_expectations(cfg, report)


def _cmd_parity(args, schemes) -> int:
    if args.log is None:
        return _run_and_export(args, schemes)
    from .harness import default_parity_model
    from .parity import read_log_csv, sliding_detection_csv
    cfg = load_config(args.config)
    if cfg.scheme != "parity":
        print("config scheme must be 'parity' for sliding detection",
              file=sys.stderr)
        return 2
    with open(args.log, "r", encoding="utf-8") as fh:
        u_log, y_log = read_log_csv(fh.read())
    io = default_parity_model(cfg.base_plant)
    text = sliding_detection_csv(u_log, y_log, io, args.delta)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print("wrote:", args.out)
    else:
        print("\n".join(text.splitlines()[:args.print_rows + 1]))
    return 0


def _cmd_bench(args) -> int:
    plant = benchmark_plant()
    rep = normalized_gains(plant)
    out = plant.to_json()
    out["checks"] = {
        "schur": bool(np.max(np.abs(np.linalg.eigvals(plant.A))) < 1.0),
        "skr_normalization": skr_normalization_deviation(rep),
        "sir_normalization": sir_normalization_deviation(rep),
    }
    _write_json(out, args.out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="projfdi",
        description="projection-based fault detection and classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factorize", help="normalized factors of a plant JSON")
    p.add_argument("--plant", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_factorize)

    p = sub.add_parser("gap", help="gap metric between two plants")
    p.add_argument("--plant-a", required=True)
    p.add_argument("--plant-b", required=True)
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gap)

    for name, schemes, help_text in [
        ("detect", ("open-loop", "kernel-L2", "closed-A", "closed-B"),
         "run a detection scenario"),
        ("classify", ("classify",), "run a classification scenario"),
        ("parity", ("parity",), "run a finite-horizon parity scenario"),
        ("montecarlo", None, "run any scenario, typically many trials"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--plots", action="store_true",
                       help="render PNG figures next to the output file")
        p.add_argument("--print-rows", type=int, default=10)
        if name == "parity":
            p.add_argument("--log", default=None,
                           help="plant log CSV (k,u0..,y0..) for "
                                "sliding-window detection instead of trials")
            p.add_argument("--delta", type=float, default=0.2,
                           help="uncertainty radius for sliding detection")
            p.set_defaults(func=lambda a, s=schemes: _cmd_parity(a, s))
        else:
            p.set_defaults(func=lambda a, s=schemes: _run_and_export(a, s))

    p = sub.add_parser("bench", help="emit the benchmark plant fixture")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProjFdiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
