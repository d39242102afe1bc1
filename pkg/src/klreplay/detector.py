"""Kullback-Leibler replay detector and the chi-square baseline.

Both detectors look at a sliding window of innovations. The KL detector
compares the window's zero-mean second-moment matrix against the nominal
innovation covariance Sigma; the chi-square detector sums the normalized
energies z' Sigma^-1 z over the window.

Besides the online :class:`InnovationWindow` interface, ``kl_series`` and
``chi2_series`` evaluate the same statistics for every step of a recorded
innovation sequence at once.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, InsufficientSamples, Singular
from .numerics import DEFAULT_OPTIONS, as_matrix, solve_discrete_lyapunov

__all__ = [
    "InnovationWindow",
    "DetectorVerdict",
    "kl_gaussian_zero_mean",
    "compute_omega",
    "attack_innovation_covariance",
    "theoretical_attack_kl",
    "unhalved_attack_kl",
    "detectability_term",
    "empirical_covariance",
    "kl_detect",
    "chi2_detect",
    "chi2_threshold",
    "detection_delay",
    "first_alarm_delay",
    "kl_series",
    "chi2_series",
    "regularization",
]


def _logdet(mat, name):
    sign, logdet = np.linalg.slogdet(mat)
    if sign <= 0 or not np.isfinite(logdet):
        raise Singular(f"{name} is singular or not positive definite")
    return logdet


def kl_gaussian_zero_mean(cov_tilde, cov):
    """D(N(0, cov_tilde) || N(0, cov)).

    0.5 * [Trace(cov^-1 cov_tilde) - m + ln(det cov / det cov_tilde)]
    """
    cov_tilde = as_matrix(cov_tilde, "cov_tilde")
    cov = as_matrix(cov, "cov", cov_tilde.shape)
    m = cov.shape[0]
    ld_cov = _logdet(cov, "cov")
    ld_tilde = _logdet(cov_tilde, "cov_tilde")
    trace = np.trace(np.linalg.solve(cov, cov_tilde))
    return float(0.5 * (trace - m + ld_cov - ld_tilde))


def compute_omega(Lambda, B, tau, opts=DEFAULT_OPTIONS):
    """Steady watermark footprint: Omega = Lambda Omega Lambda' + B tau B'."""
    B = as_matrix(B, "B")
    tau = as_matrix(tau, "tau", (B.shape[1], B.shape[1]))
    return solve_discrete_lyapunov(Lambda, B @ tau @ B.T, opts)


def attack_innovation_covariance(gains, model, Omega):
    """phi = Sigma + 2 C Omega C', the innovation covariance under replay."""
    C = model.C
    Omega = as_matrix(Omega, "Omega", (model.n, model.n))
    return gains.Sigma + 2.0 * C @ Omega @ C.T


def theoretical_attack_kl(gains, model, Omega):
    """Steady-state D(replayed innovations || nominal innovations)."""
    return kl_gaussian_zero_mean(attack_innovation_covariance(gains, model, Omega), gains.Sigma)


def detectability_term(gains, model, Omega):
    """Trace(Sigma^-1 2 C Omega C')."""
    extra = 2.0 * model.C @ Omega @ model.C.T
    return float(np.trace(np.linalg.solve(gains.Sigma, extra)))


def unhalved_attack_kl(gains, model, Omega):
    """Trace(Sigma^-1 2 C Omega C') + ln det Sigma - ln det phi.

    Same expression without the 1/2 factors; equal to twice
    :func:`theoretical_attack_kl`. Kept for side-by-side reporting.
    """
    phi = attack_innovation_covariance(gains, model, Omega)
    return (
        detectability_term(gains, model, Omega)
        + _logdet(gains.Sigma, "Sigma")
        - _logdet(phi, "phi")
    )


class InnovationWindow:
    """Fixed-capacity FIFO of innovation vectors; the oldest entry is evicted."""

    def __init__(self, capacity, dim=None):
        if int(capacity) < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.dim = dim
        self._items = deque(maxlen=self.capacity)

    def push(self, z):
        z = np.array(z, dtype=float).reshape(-1)
        if self.dim is None:
            self.dim = z.shape[0]
        elif z.shape[0] != self.dim:
            raise DimensionMismatch(f"innovation of length {z.shape[0]}, window holds {self.dim}")
        self._items.append(z)

    def extend(self, zs):
        for z in zs:
            self.push(z)
        return self

    @property
    def count(self):
        return len(self._items)

    def __len__(self):
        return len(self._items)

    def as_array(self):
        if not self._items:
            return np.zeros((0, self.dim or 0))
        return np.vstack(self._items)


@dataclass(frozen=True)
class DetectorVerdict:
    statistic: float
    threshold: float
    alarm: bool
    k: int = -1


def regularization(Sigma):
    m = Sigma.shape[0]
    return 1e-9 * float(np.trace(Sigma)) / m


def empirical_covariance(window):
    """(1/count) sum z z' over the window; innovations are zero-mean."""
    m = window.dim or 0
    if window.count < m + 1 or window.count == 0:
        raise InsufficientSamples(f"need at least {m + 1} innovations, have {window.count}")
    Z = window.as_array()
    return Z.T @ Z / window.count


def kl_detect(window, gains, threshold, k=-1):
    Sigma = gains.Sigma
    S = empirical_covariance(window) + regularization(Sigma) * np.eye(Sigma.shape[0])
    stat = kl_gaussian_zero_mean(S, Sigma)
    return DetectorVerdict(stat, float(threshold), bool(stat > threshold), k)


def chi2_threshold(count, m, significance):
    return float(stats.chi2.ppf(1.0 - significance, m * count))


def chi2_detect(window, gains, significance, k=-1):
    if not 0.0 < significance < 1.0:
        raise ValueError("significance must lie in (0, 1)")
    if window.count == 0:
        raise InsufficientSamples("chi-square detector needs at least one innovation")
    Z = window.as_array()
    g = float(np.sum(Z * np.linalg.solve(gains.Sigma, Z.T).T))
    thr = chi2_threshold(window.count, Z.shape[1], significance)
    return DetectorVerdict(g, thr, bool(g > thr), k)


def detection_delay(verdicts, attack_start):
    """Steps from ``attack_start`` to the first alarm at or after it; None if never."""
    for v in verdicts:
        if v.k >= attack_start and v.alarm:
            return v.k - attack_start
    return None


def first_alarm_delay(alarms, attack_start):
    """Array form of :func:`detection_delay` for a per-step alarm vector."""
    hits = np.flatnonzero(np.asarray(alarms[attack_start:], dtype=bool))
    return int(hits[0]) if hits.size else None


def _window_sums(values, capacity):
    """Sum of the last ``capacity`` entries along axis 0, for every step."""
    csum = np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(values, axis=0)])
    H = values.shape[0]
    hi = np.arange(1, H + 1)
    lo = np.maximum(hi - capacity, 0)
    return csum[hi] - csum[lo], hi - lo


def kl_series(z, Sigma, capacity):
    """KL statistic for each step's window; NaN until m + 1 samples exist."""
    z = np.asarray(z, dtype=float)
    H, m = z.shape
    outer = z[:, :, None] * z[:, None, :]
    sums, counts = _window_sums(outer, capacity)
    S = sums / counts[:, None, None] + regularization(Sigma) * np.eye(m)
    Sigma_inv = np.linalg.inv(Sigma)
    trace = np.einsum("ij,kji->k", Sigma_inv, S)
    _, ld_S = np.linalg.slogdet(S)
    ld_Sigma = _logdet(Sigma, "Sigma")
    out = 0.5 * (trace - m + ld_Sigma - ld_S)
    out[counts < m + 1] = np.nan
    return out, counts


def chi2_series(z, Sigma, capacity):
    """Windowed sum of z' Sigma^-1 z for each step."""
    z = np.asarray(z, dtype=float)
    energy = np.sum(z * np.linalg.solve(Sigma, z.T).T, axis=1)
    sums, counts = _window_sums(energy, capacity)
    return sums, counts
