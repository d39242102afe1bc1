"""Independent reference computations the package is checked against.

Nothing here calls into klreplay; each oracle takes a different route
(closed form, Kronecker vectorization, SciPy solver, quadrature).
"""

import math

import numpy as np
from scipy import integrate, linalg

PHI = (1.0 + math.sqrt(5.0)) / 2.0


def dare_scipy(A, B, F, G):
    return linalg.solve_discrete_are(A, B, F, G)


def riccati_residual(R, A, B, F, G):
    BtR = B.T @ R
    rhs = A.T @ R @ A + F - A.T @ R @ B @ np.linalg.solve(BtR @ B + G, BtR @ A)
    return float(np.max(np.abs(R - rhs)))


def lyapunov_kron(L, Q):
    """Solve X = L X L' + Q through (I - L kron L) vec X = vec Q."""
    n = L.shape[0]
    vec = np.linalg.solve(np.eye(n * n) - np.kron(L, L), Q.reshape(-1))
    return vec.reshape(n, n)


def lyapunov_series(L, Q, tol=1e-14):
    X = np.zeros_like(Q, dtype=float)
    term = Q.astype(float)
    power = np.eye(L.shape[0])
    for _ in range(100000):
        X = X + term
        power = L @ power
        if np.max(np.abs(power)) < tol:
            break
        term = power @ Q @ power.T
    return X


def scalar_dropout_riccati(a, c, w, v, beta):
    """Positive root of P = a^2 (P - beta P^2 c^2 / (c^2 P + v)) + w."""
    qa = c * c * (1.0 - a * a * (1.0 - beta))
    qb = v - a * a * v - w * c * c
    qc = -w * v
    if abs(qa) < 1e-15:
        return -qc / qb
    disc = math.sqrt(qb * qb - 4.0 * qa * qc)
    return (-qb + disc) / (2.0 * qa)


def scalar_dare(a, b, f, g):
    """Positive root of r = a^2 r + f - a^2 b^2 r^2 / (b^2 r + g)."""
    if b == 0:
        return f / (1.0 - a * a)
    qa = b * b
    qb = g - a * a * g - f * b * b
    qc = -f * g
    return (-qb + math.sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa)


def kl_quadrature(var_tilde, var):
    """Integral of p log(p / q) for p = N(0, var_tilde), q = N(0, var)."""

    def integrand(x):
        lp = -0.5 * x * x / var_tilde - 0.5 * math.log(2 * math.pi * var_tilde)
        lq = -0.5 * x * x / var - 0.5 * math.log(2 * math.pi * var)
        return math.exp(lp) * (lp - lq)

    span = 40.0 * math.sqrt(var_tilde)
    val, _ = integrate.quad(integrand, -span, span, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def kl_generalized_eigen(S, Sigma):
    """0.5 * sum(l - 1 - ln l) over the generalized eigenvalues of (S, Sigma)."""
    lam = linalg.eigh(S, Sigma, eigvals_only=True)
    return float(0.5 * np.sum(lam - 1.0 - np.log(lam)))


def random_spd(rng, n, scale=1.0, floor=0.1):
    X = rng.normal(size=(n, n))
    return scale * (X @ X.T / n) + floor * np.eye(n)


def random_stable(rng, n, radius):
    A = rng.normal(size=(n, n))
    rho = max(abs(np.linalg.eigvals(A)))
    return A * (radius / rho)
