"""CSV and manifest emission.

Floats are written with ``repr`` (shortest round-trip form), so equal
numbers always produce equal bytes and the files reload losslessly.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .. import __version__
from ..controller import watermark_penalty
from ..detector import compute_omega, theoretical_attack_kl
from ..errors import InsufficientSamples
from .montecarlo import estimation_error_trace_series, median_delay

__all__ = [
    "trace_columns",
    "trace_rows",
    "write_traces",
    "write_aggregate",
    "write_runs",
    "summary",
    "write_manifest",
    "write_report",
]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def trace_columns(n, m, p):
    cols = ["run", "k"]
    for prefix, size in (("x", n), ("xhat", n), ("y_delivered", m), ("z", m), ("u", p), ("du", p)):
        cols += [f"{prefix}{i}" for i in range(size)]
    return cols + ["kl_stat", "chi2_stat", "kl_alarm", "chi2_alarm", "step_cost"]


def trace_rows(trace):
    kl_alarm, chi2_alarm = trace.kl_alarm, trace.chi2_alarm
    for k in range(trace.horizon):
        row = [trace.run, k]
        for arr in (trace.x, trace.x_est, trace.y_delivered, trace.z, trace.u, trace.du):
            row.extend(arr[k])
        row += [trace.kl[k], trace.chi2[k], kl_alarm[k], chi2_alarm[k], trace.cost[k]]
        yield [_fmt(v) for v in row]


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_traces(path, traces, model):
    """One row per (run, k), runs in the order given."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(trace_columns(model.n, model.m, model.p))
        for tr in traces:
            w.writerows(trace_rows(tr))


def write_aggregate(path, report):
    """Per-step ensemble statistics keyed by k."""
    stats = {name: report.per_step(name) for name in ("kl", "chi2", "cost")}
    try:
        err_trace = estimation_error_trace_series(report)
    except InsufficientSamples:
        err_trace = np.full(report.horizon, np.nan)
    cols = ["k"]
    for name in stats:
        cols += [f"{name}_{q}" for q in ("mean", "q05", "q50", "q95")]
    cols += ["kl_alarm_rate", "chi2_alarm_rate", "error_cov_trace"]
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(cols)
        for k in range(report.horizon):
            row = [k]
            for s in stats.values():
                row += [s["mean"][k], s["q05"][k], s["q50"][k], s["q95"][k]]
            row += [report.kl_alarm_rate[k], report.chi2_alarm_rate[k], err_trace[k]]
            w.writerow([_fmt(v) for v in row])


def write_runs(path, report):
    """Per-run summaries: mean cost, detection delays (blank if none) and false alarms."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["run", "mean_cost", "kl_delay", "chi2_delay", "kl_false_alarms", "chi2_false_alarms"])
        for i in range(report.runs):
            delays = [
                "" if np.isnan(d) else str(int(d))
                for d in (report.kl_delays[i], report.chi2_delays[i])
            ]
            w.writerow([
                str(i), _fmt(report.mean_costs[i]), *delays,
                str(int(report.kl_false_alarms[i])), str(int(report.chi2_false_alarms[i])),
            ])


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


def summary(report):
    """Headline numbers of a report, including the detector delay comparison."""
    cfg, loop = report.config, report.loop
    attack_kl = None
    if loop.replay_radius < 1:
        omega = compute_omega(loop.Lambda, cfg.model.B, cfg.watermark.tau)
        attack_kl = _finite_or_none(theoretical_attack_kl(loop.gains, cfg.model, omega))
    kl_fa, chi2_fa = report.false_alarm_rates()
    out = {
        "runs": report.runs,
        "horizon": report.horizon,
        "theory": {
            "lqg_cost": _finite_or_none(loop.cost),
            "watermarked_cost": _finite_or_none(
                loop.cost + watermark_penalty(cfg.model, loop.design, cfg.watermark.tau)
            ),
            "attack_kl": attack_kl,
            "replay_radius": float(loop.replay_radius),
        },
        "empirical": {
            "mean_cost": float(report.mean_costs.mean()),
            "kl_false_alarm_rate": _finite_or_none(kl_fa),
            "chi2_false_alarm_rate": _finite_or_none(chi2_fa),
        },
    }
    if cfg.attack.active:
        kl_med, chi2_med = median_delay(report.kl_delays), median_delay(report.chi2_delays)
        out["delay_comparison"] = {
            "kl_median_delay": _finite_or_none(kl_med),
            "chi2_median_delay": _finite_or_none(chi2_med),
            "kl_detected_fraction": float(np.mean(~np.isnan(report.kl_delays))),
            "chi2_detected_fraction": float(np.mean(~np.isnan(report.chi2_delays))),
            "kl_not_slower": bool(kl_med <= chi2_med),
        }
    return out


def write_manifest(path, config, thresholds, extra=None):
    data = {
        "name": config.name,
        "version": __version__,
        "config_sha256": config.digest(),
        "seed": int(config.seed),
        "runs": int(config.runs),
        "thresholds": {
            "kl": _finite_or_none(thresholds.kl),
            "chi2": "analytic" if thresholds.chi2 is None else float(thresholds.chi2),
            "chi2_significance": float(thresholds.chi2_significance),
        },
        "config": config.to_dict(),
    }
    if extra:
        data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_report(out_dir, report, traces=None):
    """Write every output file of one scenario into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if traces is not None:
        write_traces(out / "traces.csv", traces, report.config.model)
    write_aggregate(out / "aggregate.csv", report)
    write_runs(out / "runs.csv", report)
    write_manifest(out / "manifest.json", report.config, report.thresholds, {"summary": summary(report)})
    return out
