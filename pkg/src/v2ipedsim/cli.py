"""Command-line interface.

Exit codes: 0 success, 1 config error, 2 runtime fault, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    ExperimentConfig,
    emit_plot_data,
    load_config,
    recompute_report,
    run_experiment,
    validate_config,
)
from .safety import SafetyReport
from .world import ConfigError as ScenarioError
from .world import NumericalFaultError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2ipedsim",
        description="Pedestrian-safety simulator comparing single-vehicle and V2I perception",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment batch and write records + reports")
    run.add_argument("--config", help="JSON config file; flags below override its fields")
    run.add_argument("--scenario", choices=["crossing", "jaywalking", "background_blending"])
    run.add_argument("--mode", action="append", choices=["single_vehicle", "v2i"],
                     help="repeatable; default is both modes")
    run.add_argument("--episodes", type=int)
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int)

    report = sub.add_parser("report", help="recompute a SafetyReport from a records file")
    report.add_argument("--records", required=True, help="records_<mode>.jsonl path")
    report.add_argument("--config", help="config used for the run (for safety parameters)")
    report.add_argument("--out", help="write the report JSON here instead of stdout")

    plot = sub.add_parser("plot-data", help="emit plot CSVs from a finished run directory")
    plot.add_argument("--run-dir", required=True)
    plot.add_argument("--kind", required=True, choices=["injury_surface", "detection_histogram"])
    plot.add_argument("--out", required=True)

    validate = sub.add_parser("validate", help="check a config file and exit")
    validate.add_argument("--config", required=True)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
        data = config.to_dict()
    else:
        data = {}
    if args.scenario:
        data["scenario"] = args.scenario
    if args.mode:
        data["modes"] = args.mode
    if args.episodes is not None:
        data["episodes"] = args.episodes
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.out:
        data["out_dir"] = args.out
    if args.workers is not None:
        data["workers"] = args.workers
    return validate_config(data)


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    manifest, reports = run_experiment(config)
    for mode, report in reports.items():
        print(
            f"{report.scenario} {mode}: episodes={report.episodes} "
            f"collision={report.collision_rate:.4f} conflict={report.conflict_rate:.4f} "
            f"injury={report.mean_injury_probability:.5f}"
        )
    print(f"outputs in {config.out_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    config = load_config(args.config) if args.config else validate_config({})
    report = recompute_report(args.records, config)
    text = json.dumps(report.to_dict(), separators=(",", ":"))
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def _cmd_plot_data(args) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json in {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    reports = []
    for mode, path in manifest["reports"].items():
        p = Path(path)
        if not p.is_absolute() and not p.exists():
            p = run_dir / p.name
        if p.exists():
            reports.append(SafetyReport.from_dict(json.loads(p.read_text(encoding="utf-8"))))
    if not reports:
        raise ConfigError(f"no reports found for run {run_dir}")
    emit_plot_data(reports, args.kind, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "report": _cmd_report,
        "plot-data": _cmd_plot_data,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalFaultError as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
