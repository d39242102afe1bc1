"""Closed-loop simulation of one run.

Per step k the loop does, in order:

1. plant update with the previous input (k > 0) and filter prediction,
2. measurement y(k),
3. the attacker records y(k) and/or substitutes a replayed value,
4. the filter update on the delivered measurement, giving z(k) and x_est(k),
5. control u = M x_est(k) + Delta-u(k), applied over the step k -> k+1.

Row k of a trace therefore holds x(k), x_est(k), the delivered y(k), z(k)
and the input computed at step k (the filter equations label that input
u(k+1), since it enters x_pred(k+1) = A x_est(k) + B u(k+1)). The step cost
is x(k)' F x(k) + u' G u for that row.

All noise for a run is drawn up front from independent named streams, so
the compiled loop below and the readable :func:`run_scenario_stepwise`
consume identical random numbers.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..attacker import ReplayAttacker, intercept, observe, virtual_gain_matrix
from ..controller import control, design_lqg, lqg_cost, watermark_draws, watermark_sample
from ..detector import chi2_series, first_alarm_delay, kl_series
from ..estimator import compute_steady_gains, initial_filter_state, predict, update
from ..errors import EmptyBuffer
from ..numerics import DEFAULT_OPTIONS, sample_gaussian, spectral_radius, stream_rngs
from ..plant import PlantState, measure, plant_step

__all__ = [
    "LoopGains",
    "Thresholds",
    "SimulationTrace",
    "STREAMS",
    "prepare",
    "draw_noise",
    "simulate",
    "run_scenario",
    "run_scenario_stepwise",
]

STREAMS = ("init", "process", "measurement", "watermark", "arrival")
MAIN, CALIBRATION = 0, 1


@dataclass(frozen=True, eq=False)
class LoopGains:
    """Steady-state artifacts shared by every run of a scenario."""

    model: object
    gains: object
    design: object
    Lambda: np.ndarray
    cost: float

    @property
    def beta(self):
        return self.gains.beta

    @property
    def P(self):
        return self.gains.P

    @property
    def K(self):
        return self.gains.K

    @property
    def Sigma(self):
        return self.gains.Sigma

    @property
    def R(self):
        return self.design.R

    @property
    def M(self):
        return self.design.M

    @property
    def replay_radius(self):
        return spectral_radius(self.Lambda)


def prepare(config, opts=DEFAULT_OPTIONS):
    model = config.model
    gains = compute_steady_gains(model, config.beta, opts)
    design = design_lqg(model, config.F, config.G, opts)
    Lambda = virtual_gain_matrix(model, design, gains)
    return LoopGains(model, gains, design, Lambda, lqg_cost(model, design, gains))


@dataclass(frozen=True)
class Thresholds:
    """Resolved alarm thresholds.

    ``chi2`` is either a number or ``None``, meaning the analytic chi-square
    quantile for the current window fill.
    """

    kl: float
    chi2: float = None
    chi2_significance: float = 0.01


@dataclass
class SimulationTrace:
    run: int
    x: np.ndarray
    x_est: np.ndarray
    y_true: np.ndarray
    y_delivered: np.ndarray
    z: np.ndarray
    u: np.ndarray
    du: np.ndarray
    kl: np.ndarray
    chi2: np.ndarray
    kl_threshold: float
    chi2_threshold: np.ndarray
    cost: np.ndarray
    attack_start: int = None
    warmup: int = 0

    @property
    def horizon(self):
        return self.x.shape[0]

    @property
    def k(self):
        return np.arange(self.horizon)

    @property
    def kl_alarm(self):
        return np.nan_to_num(self.kl, nan=-np.inf) > self.kl_threshold

    @property
    def chi2_alarm(self):
        return self.chi2 > self.chi2_threshold

    @property
    def estimation_error(self):
        return self.x - self.x_est

    @property
    def mean_cost(self):
        return float(np.mean(self.cost))

    def _delay(self, alarms):
        if self.attack_start is None:
            return None
        return first_alarm_delay(alarms, self.attack_start)

    @property
    def kl_delay(self):
        return self._delay(self.kl_alarm)

    @property
    def chi2_delay(self):
        return self._delay(self.chi2_alarm)

    def _false_alarms(self, alarms):
        stop = self.horizon if self.attack_start is None else self.attack_start
        return int(np.count_nonzero(alarms[self.warmup:stop]))

    @property
    def kl_false_alarms(self):
        return self._false_alarms(self.kl_alarm)

    @property
    def chi2_false_alarms(self):
        return self._false_alarms(self.chi2_alarm)


def draw_noise(config, loop, run_index, purpose=MAIN):
    """Every random quantity one run needs, from its own named streams."""
    model, H = config.model, config.horizon
    rngs = stream_rngs(config.seed, run_index, STREAMS, purpose)
    x0 = sample_gaussian(config.x_bar0, loop.P, rngs["init"])
    w = sample_gaussian(np.zeros(model.n), model.W, rngs["process"], size=H)
    v = sample_gaussian(np.zeros(model.m), model.V, rngs["measurement"], size=H)
    du = watermark_draws(config.watermark, H, rngs["watermark"])
    if config.beta_mode == "bernoulli":
        beta_seq = (rngs["arrival"].random(H) < config.beta).astype(float)
    else:
        beta_seq = np.full(H, float(config.beta))
    return x0, w, v, du, beta_seq


@njit(cache=True)
def _mv(Mat, vec, out):
    for i in range(Mat.shape[0]):
        acc = 0.0
        for j in range(Mat.shape[1]):
            acc += Mat[i, j] * vec[j]
        out[i] = acc


@njit(cache=True)
def _closed_loop(A, B, C, K, M, x0, xpred0, w, v, du, beta_seq,
                 replay, record_from, attack_start, wrap):
    H = v.shape[0]
    n = A.shape[0]
    m = C.shape[0]
    p = B.shape[1]
    xs = np.empty((H, n))
    xe = np.empty((H, n))
    yt = np.empty((H, m))
    yd = np.empty((H, m))
    zs = np.empty((H, m))
    us = np.empty((H, p))

    x = x0.copy()
    xpred = xpred0.copy()
    xest = np.zeros(n)
    u = np.zeros(p)
    t1 = np.empty(n)
    t2 = np.empty(n)
    ty = np.empty(m)
    tk = np.empty(n)
    tu = np.empty(p)
    length = attack_start - record_from

    for k in range(H):
        if k > 0:
            _mv(A, x, t1)
            _mv(B, u, t2)
            for i in range(n):
                x[i] = t1[i] + t2[i] + w[k - 1, i]
            _mv(A, xest, t1)
            for i in range(n):
                xpred[i] = t1[i] + t2[i]
        _mv(C, x, ty)
        for i in range(m):
            yt[k, i] = ty[i] + v[k, i]
        if replay and k >= attack_start:
            j = k - attack_start
            if wrap:
                j = j % length
            elif j > length - 1:
                j = length - 1
            src = record_from + j
        else:
            src = k
        _mv(C, xpred, ty)
        for i in range(m):
            yd[k, i] = yt[src, i]
            zs[k, i] = yd[k, i] - ty[i]
        _mv(K, zs[k], tk)
        b = beta_seq[k]
        for i in range(n):
            xest[i] = xpred[i] + b * tk[i]
        _mv(M, xest, tu)
        for i in range(p):
            u[i] = tu[i] + du[k, i]
        xs[k] = x
        xe[k] = xest
        us[k] = u
    return xs, xe, yt, yd, zs, us


def _quadratic(X, Q):
    return np.einsum("ki,ij,kj->k", X, Q, X)


def resolve_chi2_threshold(thresholds, counts, m):
    if thresholds.chi2 is not None:
        return np.full(counts.shape, float(thresholds.chi2))
    from scipy import stats

    uniq, inverse = np.unique(counts, return_inverse=True)
    levels = stats.chi2.ppf(1.0 - thresholds.chi2_significance, m * uniq)
    return levels[inverse]


def _finish(config, loop, run_index, thresholds, arrays):
    xs, xe, yt, yd, zs, us, du = arrays
    if np.linalg.eigvalsh(loop.Sigma)[0] > 0:
        kl, counts = kl_series(zs, loop.Sigma, config.window_capacity)
        chi2, _ = chi2_series(zs, loop.Sigma, config.window_capacity)
    else:
        # noise-free output: no innovation distribution to compare against
        counts = np.minimum(np.arange(1, config.horizon + 1), config.window_capacity)
        kl = np.full(config.horizon, np.nan)
        chi2 = np.full(config.horizon, np.nan)
    thresholds = thresholds or Thresholds(kl=np.inf, chi2_significance=config.chi2_significance)
    cost = _quadratic(xs, config.F) + _quadratic(us, config.G)
    return SimulationTrace(
        run=run_index, x=xs, x_est=xe, y_true=yt, y_delivered=yd, z=zs, u=us, du=du,
        kl=kl, chi2=chi2, kl_threshold=float(thresholds.kl),
        chi2_threshold=resolve_chi2_threshold(thresholds, counts, config.model.m),
        cost=cost,
        attack_start=config.attack.attack_start if config.attack.active else None,
        warmup=config.effective_warmup,
    )


def _check_attack(config):
    at = config.attack
    if at.active and at.attack_start - at.record_from < 1:
        raise EmptyBuffer("replay scheduled with an empty recording interval")


def simulate(config, run_index, loop=None, thresholds=None, purpose=MAIN):
    """Run the compiled closed loop once and return its trace."""
    loop = loop or prepare(config)
    _check_attack(config)
    x0, w, v, du, beta_seq = draw_noise(config, loop, run_index, purpose)
    at = config.attack
    out = _closed_loop(
        config.model.A, config.model.B, config.model.C,
        np.ascontiguousarray(loop.K), np.ascontiguousarray(loop.M),
        x0, config.x_bar0.copy(), w, v, du, beta_seq,
        at.active, at.record_from, at.attack_start, at.wrap,
    )
    return _finish(config, loop, run_index, thresholds, out + (du,))


def run_scenario(config, run_index=0, loop=None, thresholds=None):
    """One run of ``config``. A ``"calibrate"`` KL threshold is resolved first."""
    loop = loop or prepare(config)
    if thresholds is None:
        from .montecarlo import resolve_thresholds

        thresholds = resolve_thresholds(config, loop)
    return simulate(config, run_index, loop, thresholds)


def run_scenario_stepwise(config, run_index=0, loop=None, thresholds=None):
    """Same loop as :func:`simulate`, written with the per-step operations.

    Slow; kept as the readable reference the compiled loop is checked
    against.
    """
    loop = loop or prepare(config)
    model, H = config.model, config.horizon
    rngs = stream_rngs(config.seed, run_index, STREAMS, MAIN)
    _check_attack(config)

    state = PlantState(sample_gaussian(config.x_bar0, loop.P, rngs["init"]), 0)
    filt = initial_filter_state(model, config.x_bar0)
    attacker = ReplayAttacker.from_schedule(config.attack)
    u = np.zeros(model.p)
    rows = {key: [] for key in ("x", "xe", "yt", "yd", "z", "u", "du")}
    for k in range(H):
        if k > 0:
            state = plant_step(model, state, u, rngs["process"])
            filt = predict(filt, model, u)
        y = measure(model, state, rngs["measurement"])
        observe(attacker, k, y)
        y_del = intercept(attacker, k, y)
        arrived = True
        if config.beta_mode == "bernoulli":
            arrived = bool(rngs["arrival"].random() < config.beta)
        filt, z = update(filt, model, loop.gains, arrived, y_del, config.beta_mode)
        du = watermark_sample(config.watermark, k, rngs["watermark"])
        u = control(loop.design, filt.x_est, du)
        for key, val in zip(rows, (state.x, filt.x_est, y, y_del, z, u, du)):
            rows[key].append(val)
    arrays = tuple(np.array(rows[key]) for key in rows)
    return _finish(config, loop, run_index, thresholds, arrays)
