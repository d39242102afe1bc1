"""Monte Carlo execution, threshold calibration and ensemble statistics.

Runs are independent: run ``i`` draws only from streams keyed on
``(seed, i)``. Results are collected per run index and reduced in index
order, so the report does not depend on how runs were scheduled.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientSamples
from .engine import CALIBRATION, MAIN, SimulationTrace, Thresholds, prepare, simulate

__all__ = [
    "Calibration",
    "RunSummary",
    "MonteCarloReport",
    "calibrate",
    "resolve_thresholds",
    "run_monte_carlo",
    "iter_traces",
    "estimation_error_trace_series",
    "median_delay",
]


@dataclass(frozen=True)
class Calibration:
    """Empirical (1 - alpha) quantiles of the no-attack detector statistics."""

    kl: float
    chi2: float
    alpha: float
    samples: int


@dataclass
class RunSummary:
    """What a report keeps from one run."""

    run: int
    error: np.ndarray
    kl: np.ndarray
    chi2: np.ndarray
    cost: np.ndarray
    kl_alarm: np.ndarray
    chi2_alarm: np.ndarray
    kl_delay: object
    chi2_delay: object
    kl_false_alarms: int
    chi2_false_alarms: int

    @classmethod
    def of(cls, trace):
        return cls(
            run=trace.run, error=trace.estimation_error, kl=trace.kl, chi2=trace.chi2,
            cost=trace.cost, kl_alarm=trace.kl_alarm, chi2_alarm=trace.chi2_alarm,
            kl_delay=trace.kl_delay, chi2_delay=trace.chi2_delay,
            kl_false_alarms=trace.kl_false_alarms, chi2_false_alarms=trace.chi2_false_alarms,
        )


def _run_chunk(args):
    config, loop, indices, thresholds, purpose, keep = args
    out = []
    for i in indices:
        tr = simulate(config, i, loop, thresholds, purpose)
        out.append(tr if keep else RunSummary.of(tr))
    return out


def _execute(config, loop, thresholds, runs, purpose, workers, keep):
    indices = list(range(runs))
    if workers <= 1 or runs == 1:
        return _run_chunk((config, loop, indices, thresholds, purpose, keep))
    chunks = [indices[i::workers] for i in range(workers)]
    by_index = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for result in pool.map(
            _run_chunk, [(config, loop, c, thresholds, purpose, keep) for c in chunks if c]
        ):
            for tr in result:
                by_index[tr.run] = tr
    return [by_index[i] for i in indices]


def calibrate(config, loop=None, runs=None, workers=1):
    """Detector thresholds at the configured false-alarm rate.

    Simulates the attack-free version of ``config`` on dedicated calibration
    streams and takes the empirical ``1 - chi2_significance`` quantile of
    each statistic over all post-warmup steps.
    """
    loop = loop or prepare(config)
    base = config.without_attack()
    runs = config.runs if runs is None else runs
    traces = _execute(base, loop, Thresholds(kl=np.inf), runs, CALIBRATION, workers, False)
    start = min(config.effective_warmup, config.horizon - 1)
    kl = np.concatenate([t.kl[start:] for t in traces])
    chi2 = np.concatenate([t.chi2[start:] for t in traces])
    kl = kl[np.isfinite(kl)]
    if kl.size == 0:
        raise InsufficientSamples("no post-warmup KL statistics to calibrate on")
    q = 1.0 - config.chi2_significance
    return Calibration(
        kl=float(np.quantile(kl, q, method="higher")),
        chi2=float(np.quantile(chi2, q, method="higher")),
        alpha=config.chi2_significance,
        samples=int(kl.size),
    )


def resolve_thresholds(config, loop=None, workers=1):
    needs = config.kl_threshold == "calibrate" or config.chi2_threshold == "calibrate"
    cal = calibrate(config, loop, workers=workers) if needs else None
    kl = cal.kl if config.kl_threshold == "calibrate" else float(config.kl_threshold)
    if config.chi2_threshold == "calibrate":
        chi2 = cal.chi2
    elif config.chi2_threshold == "analytic":
        chi2 = None
    else:
        chi2 = float(config.chi2_threshold)
    return Thresholds(kl=kl, chi2=chi2, chi2_significance=config.chi2_significance)


@dataclass
class MonteCarloReport:
    config: object
    loop: object
    thresholds: Thresholds
    kl: np.ndarray          # (runs, horizon)
    chi2: np.ndarray        # (runs, horizon)
    cost: np.ndarray        # (runs, horizon)
    error: np.ndarray       # (runs, horizon, n) estimation error x - x_est
    kl_delays: np.ndarray   # (runs,) NaN when never detected
    chi2_delays: np.ndarray
    kl_false_alarms: np.ndarray
    chi2_false_alarms: np.ndarray
    kl_alarm_rate: np.ndarray   # (horizon,)
    chi2_alarm_rate: np.ndarray

    @property
    def runs(self):
        return self.kl.shape[0]

    @property
    def horizon(self):
        return self.kl.shape[1]

    @property
    def mean_costs(self):
        return self.cost.mean(axis=1)

    def per_step(self, name):
        """Mean and 5/50/95 % quantiles across runs for ``kl``, ``chi2`` or ``cost``."""
        data = getattr(self, name)
        with np.errstate(all="ignore"):
            if np.all(np.isnan(data)):
                nan = np.full(self.horizon, np.nan)
                return {"mean": nan, "q05": nan, "q50": nan, "q95": nan}
            cols = ~np.all(np.isnan(data), axis=0)
            mean = np.full(self.horizon, np.nan)
            qs = np.full((3, self.horizon), np.nan)
            mean[cols] = np.nanmean(data[:, cols], axis=0)
            qs[:, cols] = np.nanquantile(data[:, cols], [0.05, 0.5, 0.95], axis=0)
        return {"mean": mean, "q05": qs[0], "q50": qs[1], "q95": qs[2]}

    def false_alarm_rates(self):
        cfg = self.config
        stop = cfg.attack.attack_start if cfg.attack.active else self.horizon
        steps = max(stop - cfg.effective_warmup, 0) * self.runs
        if steps == 0:
            return float("nan"), float("nan")
        return (
            float(self.kl_false_alarms.sum() / steps),
            float(self.chi2_false_alarms.sum() / steps),
        )


def _delays(traces, attr):
    vals = [getattr(t, attr) for t in traces]
    return np.array([np.nan if d is None else d for d in vals], dtype=float)


def run_monte_carlo(config, workers=1, thresholds=None, loop=None, runs=None):
    """Execute ``config.runs`` independent runs and aggregate them."""
    loop = loop or prepare(config)
    thresholds = thresholds or resolve_thresholds(config, loop, workers)
    runs = config.runs if runs is None else runs
    traces = _execute(config, loop, thresholds, runs, MAIN, workers, False)
    kl_alarm = np.stack([t.kl_alarm for t in traces])
    chi2_alarm = np.stack([t.chi2_alarm for t in traces])
    return MonteCarloReport(
        config=config,
        loop=loop,
        thresholds=thresholds,
        kl=np.stack([t.kl for t in traces]),
        chi2=np.stack([t.chi2 for t in traces]),
        cost=np.stack([t.cost for t in traces]),
        error=np.stack([t.error for t in traces]),
        kl_delays=_delays(traces, "kl_delay"),
        chi2_delays=_delays(traces, "chi2_delay"),
        kl_false_alarms=np.array([t.kl_false_alarms for t in traces]),
        chi2_false_alarms=np.array([t.chi2_false_alarms for t in traces]),
        kl_alarm_rate=kl_alarm.mean(axis=0),
        chi2_alarm_rate=chi2_alarm.mean(axis=0),
    )


def iter_traces(config, loop=None, thresholds=None, runs=None):
    """Full traces of each run in index order, simulated one at a time.

    The runs are the same as those summarized by :func:`run_monte_carlo`
    with equal thresholds.
    """
    loop = loop or prepare(config)
    thresholds = thresholds or resolve_thresholds(config, loop)
    runs = config.runs if runs is None else runs
    for i in range(runs):
        yield simulate(config, i, loop, thresholds, MAIN)


def default_workers():
    return max(1, min(8, (os.cpu_count() or 1)))


def estimation_error_trace_series(result):
    """Per-step trace of the across-run sample covariance of x - x_est."""
    if isinstance(result, SimulationTrace):
        raise InsufficientSamples("ensemble covariance needs at least 2 runs; got a single trace")
    err = result.error
    if err.shape[0] < 2:
        raise InsufficientSamples(f"ensemble covariance needs at least 2 runs, got {err.shape[0]}")
    return err.var(axis=0, ddof=1).sum(axis=-1)


def median_delay(delays):
    """Median detection delay with undetected runs counted as infinitely late."""
    return float(np.median(np.where(np.isnan(delays), np.inf, delays)))
