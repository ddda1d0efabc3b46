"""Batch command line interface.

Subcommands:

* ``run``          one experiment (all configured schemes x trials)
* ``sweep``        parameter sweep from the config's sweep definition
* ``beampattern``  optimize one trial per scheme and export the gain pattern
* ``validate``     built-in gradient / estimator / inequality self checks

Exit codes: 0 success, 1 configuration or I/O error, 2 validation failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness, validate
from .config import ConfigError, SCHEME_TAGS, build_experiment, format_manifest, load_config


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--seed", type=int, default=None, help="override master seed")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--format", choices=("csv", "json"), default="csv",
                     help="record file format")
    sub.add_argument("--trials", type=int, default=None, help="override trial count")
    sub.add_argument("--scheme", default=None,
                     help="comma-separated scheme tags overriding the config")
    sub.add_argument("--manifest", action="store_true",
                     help="write the fully resolved config next to the results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotasec",
        description="Sensing-aided secure multicast designs for a rotatable-antenna "
                    "base station: Monte-Carlo experiments, sweeps and beam patterns.")
    subs = parser.add_subparsers(dest="command", required=True)
    run = subs.add_parser("run", help="run one experiment")
    _common_flags(run)
    sweep = subs.add_parser("sweep", help="run the configured parameter sweep")
    _common_flags(sweep)
    beam = subs.add_parser("beampattern", help="export optimized beam patterns")
    _common_flags(beam)
    beam.add_argument("--resolution", type=float, default=None,
                      help="pattern resolution in degrees")
    val = subs.add_parser("validate", help="run built-in numerical self checks")
    _common_flags(val)
    return parser


def _resolve(args) -> tuple:
    flat = load_config(args.config)
    if args.seed is not None:
        flat["experiment.master_seed"] = int(args.seed)
    if args.trials is not None:
        flat["experiment.n_trials"] = int(args.trials)
    if args.scheme:
        tags = [s.strip() for s in args.scheme.split(",") if s.strip()]
        for tag in tags:
            if tag not in SCHEME_TAGS:
                raise ConfigError(
                    f"unknown scheme tag {tag!r}; valid: {', '.join(SCHEME_TAGS)}")
        flat["experiment.schemes"] = tags
    return build_experiment(flat), flat


def _write(path: str, content: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(content)


def _emit(args, ecfg, flat, records, stem: str) -> None:
    os.makedirs(args.out, exist_ok=True)
    if args.format == "csv":
        _write(os.path.join(args.out, f"{stem}.csv"),
               harness.records_to_csv(records))
    else:
        _write(os.path.join(args.out, f"{stem}.jsonl"),
               harness.records_to_jsonl(records))
    _write(os.path.join(args.out, f"{stem}_summary.csv"),
           harness.summary_to_csv(harness.summarize(records)))
    _write(os.path.join(args.out, f"{stem}_timings.csv"),
           harness.timings_to_csv(records))
    if args.manifest:
        _write(os.path.join(args.out, "manifest.txt"), format_manifest(flat))


def _cmd_run(args) -> int:
    ecfg, flat = _resolve(args)
    records = harness.run_experiment(ecfg)
    _emit(args, ecfg, flat, records, "records")
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    ecfg, flat = _resolve(args)
    if not ecfg.sweep_parameter:
        raise ConfigError("sweep requested but experiment.sweep_parameter is empty")
    records = harness.run_sweep(ecfg)
    _emit(args, ecfg, flat, records, "sweep")
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_beampattern(args) -> int:
    ecfg, flat = _resolve(args)
    resolution = None
    if args.resolution is not None:
        if args.resolution <= 0:
            raise ConfigError("resolution must be positive")
        resolution = float(np.deg2rad(args.resolution))
    trial = 0
    scene = harness.generate_scene(
        ecfg, harness.derive_seed(ecfg.master_seed, trial, 0))
    theta_hat, crb_value = harness.run_sensing(ecfg, trial)
    patterns = {}
    for scheme in ecfg.schemes:
        outcome = harness.sensing_outcome_for_scheme(ecfg, scheme,
                                                     theta_hat, crb_value)
        sol, _ = harness.solve_scheme(ecfg, scheme, scene, outcome)
        patterns[scheme] = harness.export_beam_pattern(ecfg, sol, scene, outcome,
                                                       resolution)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "beampattern.csv"),
           harness.beam_pattern_to_csv(patterns))
    if args.manifest:
        _write(os.path.join(args.out, "manifest.txt"), format_manifest(flat))
    print(f"wrote beam patterns for {len(patterns)} schemes to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    ecfg, _ = _resolve(args)
    mse_trials = args.trials if args.trials is not None else 1000
    ok, lines = validate.run_all(ecfg, mse_trials=mse_trials)
    for line in lines:
        print(line)
    return 0 if ok else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "beampattern": _cmd_beampattern,
        "validate": _cmd_validate,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
