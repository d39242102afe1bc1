"""Infinite-horizon LQG gain, its closed-form average cost, and the
watermark perturbation added to the control input."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnstableClosedLoopWarning
from .numerics import (
    DEFAULT_OPTIONS,
    as_matrix,
    as_vector,
    psd_factor,
    sample_gaussian,
    solve_dare,
    spectral_radius,
)

__all__ = [
    "LqgDesign",
    "Watermark",
    "design_lqg",
    "lqg_cost",
    "control",
    "watermark_sample",
    "watermark_draws",
    "watermarked_cost",
    "watermark_penalty",
]


@dataclass(frozen=True, eq=False)
class LqgDesign:
    R: np.ndarray
    M: np.ndarray
    F: np.ndarray
    G: np.ndarray
    closed_loop_radius: float

    @property
    def stable(self):
        return self.closed_loop_radius < 1.0


@dataclass(frozen=True, eq=False)
class Watermark:
    """Zero-mean i.i.d. Gaussian input perturbation with covariance ``tau``."""

    tau: np.ndarray
    active_from: int = 0

    def __post_init__(self):
        tau = as_matrix(self.tau, "tau")
        if tau.shape[0] != tau.shape[1]:
            raise DimensionMismatch(f"tau must be square, got {tau.shape}")
        psd_factor(tau, "tau")
        if int(self.active_from) < 0:
            raise ValueError("active_from must be >= 0")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "active_from", int(self.active_from))

    @classmethod
    def off(cls, p):
        return cls(np.zeros((p, p)), 0)

    @property
    def is_zero(self):
        return not np.any(self.tau)


def design_lqg(model, F=None, G=None, opts=DEFAULT_OPTIONS):
    """Solve for R and M = -(B'RB + G)^-1 B'RA.

    Without control authority (B = 0) and an unstable A no finite cost-to-go
    exists; M = 0 and R = inf are returned with an unstable status instead
    of raising.
    """
    n, p = model.n, model.p
    F = np.eye(n) if F is None else as_matrix(F, "F", (n, n))
    G = np.eye(p) if G is None else as_matrix(G, "G", (p, p))
    A, B = model.A, model.B

    if not np.any(B) and spectral_radius(A) >= 1.0:
        R = np.full((n, n), np.inf)
        M = np.zeros((p, n))
    else:
        R = solve_dare(A, B, F, G, opts)
        M = -np.linalg.solve(B.T @ R @ B + G, B.T @ R @ A)
    radius = spectral_radius(A + B @ M)
    if radius >= 1.0:
        warnings.warn(
            f"closed loop A + BM has spectral radius {radius:.4g} >= 1",
            UnstableClosedLoopWarning,
            stacklevel=2,
        )
    return LqgDesign(R=R, M=M, F=F, G=G, closed_loop_radius=radius)


def lqg_cost(model, design, gains):
    """Trace(R W) + Trace[(A'RA + F - R)(P - beta K C P)]."""
    R, A = design.R, model.A
    if R.shape != (model.n, model.n) or gains.P.shape != (model.n, model.n):
        raise DimensionMismatch("design, gains and model disagree on the state dimension")
    if not np.all(np.isfinite(R)):
        return float("inf")
    weight = A.T @ R @ A + design.F - R
    return float(np.trace(R @ model.W) + np.trace(weight @ gains.posterior_covariance))


def control(design, x_est, delta_u):
    p, n = design.M.shape
    return design.M @ as_vector(x_est, n, "x_est") + as_vector(delta_u, p, "delta_u")


def watermark_sample(wm, k, rng):
    """Delta-u for step k: zero before ``active_from``, a fresh N(0, tau) draw after."""
    p = wm.tau.shape[0]
    if k < wm.active_from:
        return np.zeros(p)
    return sample_gaussian(np.zeros(p), wm.tau, rng)


def watermark_draws(wm, horizon, rng):
    """All of a run's Delta-u rows at once; rows before ``active_from`` are zero.

    Consumes ``rng`` exactly like calling :func:`watermark_sample` for
    k = 0 .. horizon-1 in order.
    """
    p = wm.tau.shape[0]
    du = np.zeros((horizon, p))
    start = min(wm.active_from, horizon)
    if start < horizon:
        du[start:] = sample_gaussian(np.zeros(p), wm.tau, rng, size=horizon - start)
    return du


def watermark_penalty(model, design, tau):
    tau = as_matrix(tau, "tau", (model.p, model.p))
    return float(np.trace((design.G + model.B.T @ design.R @ model.B) @ tau))


def watermarked_cost(lam, model, design, wm):
    """lambda + Trace[(G + B'RB) tau]."""
    return float(lam) + watermark_penalty(model, design, wm.tau)
