"""Fixed-gain Kalman filter with a packet-dropout coefficient.

The filter runs at its steady state from k = 0: the gain K is computed
offline from the limit P of

    P <- A (P - beta K C P) A' + W,   K = P C' (C P C' + V)^-1

and every measurement update is scaled by beta. Two interpretations of
beta are supported:

``"fixed"``
    every update uses beta * K (the default).
``"bernoulli"``
    each measurement arrives with probability beta; an arrived packet is
    applied with the full gain K, a lost one not at all. Under this reading
    P is exactly the stationary prediction-error covariance and
    ``P - beta K C P`` the expected posterior one.

With beta < 1 in fixed mode the true posterior covariance is
``P - (2 beta - beta^2) K C P``, so closed-form costs built on
``P - beta K C P`` match simulation only in Bernoulli mode.

Timing: the input passed to :func:`predict` is the one that drives the
plant from step k-1 to step k, so ``x_pred(k) = A x_est(k-1) + B u``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonConvergence
from .numerics import DEFAULT_OPTIONS, as_vector, converged

__all__ = [
    "BETA_MODES",
    "SteadyStateGains",
    "FilterState",
    "compute_steady_gains",
    "kalman_gain",
    "predict",
    "update",
    "initial_filter_state",
]

BETA_MODES = ("fixed", "bernoulli")


@dataclass(frozen=True, eq=False)
class SteadyStateGains:
    P: np.ndarray
    K: np.ndarray
    Sigma: np.ndarray
    beta: float

    @property
    def posterior_covariance(self):
        """P - beta K C P, the (expected) covariance after the update."""
        # K C P = P C' Sigma^-1 C P; written through Sigma to stay symmetric.
        KCP = self.K @ self.Sigma @ self.K.T
        return self.P - self.beta * KCP


@dataclass(frozen=True)
class FilterState:
    x_pred: np.ndarray
    x_est: np.ndarray
    k: int = 0


def _check_beta(beta):
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return beta


def kalman_gain(P, C, V):
    """Return (K, Sigma) for prediction covariance P."""
    Sigma = C @ P @ C.T + V
    Sigma = 0.5 * (Sigma + Sigma.T)
    PCt = P @ C.T
    if np.linalg.eigvalsh(Sigma)[0] > 0:
        K = np.linalg.solve(Sigma, PCt.T).T
    else:
        # noise-free degenerate plants; no usable innovation directions
        K = PCt @ np.linalg.pinv(Sigma)
    return K, Sigma


def compute_steady_gains(model, beta=1.0, opts=DEFAULT_OPTIONS):
    """Iterate the dropout Riccati recursion from P = W to its fixed point."""
    beta = _check_beta(beta)
    A, C, W, V = model.A, model.C, model.W, model.V
    P = W.copy()
    step = np.inf
    for it in range(1, int(opts.max_iterations) + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            K, Sigma = kalman_gain(P, C, V)
            P_next = A @ (P - beta * K @ C @ P) @ A.T + W
            P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            raise NonConvergence("filter Riccati iteration diverged", it, step)
        step = float(np.max(np.abs(P_next - P)))
        if converged(step, P, opts.tolerance):
            return SteadyStateGains(P=P, K=K, Sigma=Sigma, beta=beta)
        P = P_next
    raise NonConvergence(
        f"filter Riccati iteration did not converge in {opts.max_iterations} iterations "
        f"(last step {step:.3e}); the plant may be too unstable for beta={beta}",
        opts.max_iterations,
        step,
    )


def initial_filter_state(model, x_bar0=None):
    x0 = np.zeros(model.n) if x_bar0 is None else as_vector(x_bar0, model.n, "x_bar0")
    return FilterState(x_pred=x0.copy(), x_est=x0.copy(), k=0)


def predict(state, model, u):
    """x_pred' = A x_est + B u. The estimate equals the prediction until updated."""
    x_est = as_vector(state.x_est, model.n, "x_est")
    u = as_vector(u, model.p, "u")
    x_pred = model.A @ x_est + model.B @ u
    return FilterState(x_pred=x_pred, x_est=x_pred.copy(), k=state.k + 1)


def update(state, model, gains, arrived, y, beta_mode="fixed"):
    """Measurement update. Returns ``(new_state, innovation)``.

    The innovation ``y - C x_pred`` is returned even when the packet was
    lost.
    """
    if beta_mode not in BETA_MODES:
        raise ValueError(f"beta_mode must be one of {BETA_MODES}")
    x_pred = as_vector(state.x_pred, model.n, "x_pred")
    y = as_vector(y, model.m, "y")
    if gains.K.shape != (model.n, model.m):
        raise DimensionMismatch(f"gain shape {gains.K.shape} does not match model")
    z = y - model.C @ x_pred
    if beta_mode == "fixed":
        b = gains.beta
    else:
        b = 1.0 if arrived else 0.0
    x_est = x_pred + b * (gains.K @ z)
    return FilterState(x_pred=x_pred, x_est=x_est, k=state.k), z
