"""Command line entry point.

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence,
4 runtime simulation error.
"""

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .attacker import stealthiness_classification
from .errors import KLReplayError, NonConvergence, ParseError, UnknownPreset, ValidationError
from .harness.config import load_scenario
from .harness.engine import prepare
from .harness.montecarlo import calibrate, iter_traces, resolve_thresholds, run_monte_carlo
from .harness.output import summary, write_report
from .harness.presets import PRESETS, preset_variants
from .harness.scan import SCAN_COLUMNS, tau_tradeoff_scan

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_RUNTIME = 0, 2, 3, 4


def _scales(text):
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("at least one scale is required")
    return values


def _load(path):
    if not Path(path).is_file():
        raise ValidationError(f"scenario file not found: {path}")
    return load_scenario(Path(path))


def _execute(config, out_dir, workers, traces):
    loop = prepare(config)
    thresholds = resolve_thresholds(config, loop, workers)
    report = run_monte_carlo(config, workers=workers, thresholds=thresholds, loop=loop)
    full = iter_traces(config, loop, thresholds) if traces else None
    write_report(out_dir, report, full)
    return summary(report)


def cmd_run(args):
    config = _load(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    config = config.with_(**changes) if changes else config
    config.validate()
    result = _execute(config, args.out, args.workers, not args.no_traces)
    print(json.dumps(result, indent=2, sort_keys=True))


def cmd_preset(args):
    out = {}
    for label, config in preset_variants(args.name).items():
        if args.runs is not None:
            config = config.with_(runs=args.runs)
        target = f"{args.out}/{label}"
        out[label] = _execute(config, target, args.workers, not args.no_traces)
    print(json.dumps(out, indent=2, sort_keys=True))


def cmd_scan_tau(args):
    config = _load(args.scenario)
    if config.watermark.is_zero:
        raise ValidationError("scan-tau needs a nonzero watermark tau in the scenario to scale")
    loop = prepare(config)
    rows = tau_tradeoff_scan(config.model, loop.design, loop.gains, config.watermark.tau, args.scales)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for row in rows:
        w.writerow([repr(float(row[c])) for c in SCAN_COLUMNS])


def cmd_calibrate(args):
    config = _load(args.scenario)
    cal = calibrate(config, runs=args.runs, workers=args.workers)
    print(json.dumps({"kl_threshold": cal.kl, "chi2_threshold": cal.chi2,
                      "alpha": cal.alpha, "samples": cal.samples}, indent=2))


def cmd_validate(args):
    config = _load(args.scenario)
    loop = prepare(config)
    info = {
        "name": config.name,
        "config_sha256": config.digest(),
        "K": loop.K.tolist(),
        "M": loop.M.tolist(),
        "Sigma": loop.Sigma.tolist(),
        "lqg_cost": float(loop.cost) if np.isfinite(loop.cost) else None,
        "replay_without_watermark": stealthiness_classification(config.model, loop.design, loop.gains),
    }
    print(json.dumps(info, indent=2))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="klreplay", description="Replay-attack detection experiments for a lossy LQG loop."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def workers(p):
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("run", help="run a scenario file and write CSV output")
    p.add_argument("scenario")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--no-traces", action="store_true", help="skip the per-(run, k) CSV")
    workers(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a built-in experiment")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out", default="out")
    p.add_argument("--runs", type=int)
    p.add_argument("--no-traces", action="store_true")
    workers(p)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("scan-tau", help="cost/detectability table for scaled watermarks")
    p.add_argument("scenario")
    p.add_argument("--scales", type=_scales, required=True)
    p.set_defaults(func=cmd_scan_tau)

    p = sub.add_parser("calibrate", help="print the empirical detector thresholds")
    p.add_argument("scenario")
    p.add_argument("--runs", type=int)
    workers(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="check a scenario file and print its gains")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except (ParseError, ValidationError, UnknownPreset) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergence as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (KLReplayError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
