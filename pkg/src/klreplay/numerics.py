"""Matrix-equation solvers, spectral radius and seeded Gaussian sampling.

Everything here is a pure function of its arguments. Random draws always
come from an explicit :class:`numpy.random.Generator`; there is no module
level random state.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonConvergence, NotPSD, UnstableOperator

__all__ = [
    "SolverOptions",
    "as_matrix",
    "as_vector",
    "solve_dare",
    "solve_discrete_lyapunov",
    "spectral_radius",
    "psd_factor",
    "sample_gaussian",
    "make_rng",
    "stream_rngs",
]

PSD_TOL = 1e-10


@dataclass(frozen=True)
class SolverOptions:
    """Stopping rule for the fixed-point solvers.

    Iteration stops once the max-abs difference between successive iterates
    drops below ``tolerance``.
    """

    tolerance: float = 1e-10
    max_iterations: int = 100_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")


DEFAULT_OPTIONS = SolverOptions()


def as_matrix(value, name="matrix", shape=None):
    """Coerce ``value`` to a finite 2-D float array.

    Scalars become 1x1 matrices. ``shape`` entries that are ``None`` are
    not checked.
    """
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionMismatch(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if shape is not None:
        for axis, want in enumerate(shape):
            if want is not None and arr.shape[axis] != want:
                raise DimensionMismatch(
                    f"{name} has shape {arr.shape}, expected {tuple(shape)}"
                )
    return arr


def as_vector(value, size, name="vector"):
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape[0] != size:
        raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {size}")
    return arr


def _square(mat, name):
    if mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {mat.shape}")
    return mat.shape[0]


def _symmetrize(mat):
    return 0.5 * (mat + mat.T)


def converged(step, X, tolerance):
    """Successive-iterate test with a floor at the rounding level of X."""
    return step < max(tolerance, 8 * np.finfo(float).eps * float(np.max(np.abs(X))))


def riccati_map(R, A, B, F, G):
    """One application of R -> A'RA + F - A'RB (B'RB + G)^-1 B'RA."""
    AtRB = A.T @ R @ B
    gain_term = AtRB @ np.linalg.solve(B.T @ R @ B + G, AtRB.T)
    return _symmetrize(A.T @ R @ A + F - gain_term)


def solve_dare(A, B, F, G, opts=DEFAULT_OPTIONS):
    """Solve the control Riccati equation by fixed-point iteration from R0 = F.

    >>> float(solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]])[0, 0])  # doctest: +ELLIPSIS
    1.6180339887...
    """
    A = as_matrix(A, "A")
    n = _square(A, "A")
    B = as_matrix(B, "B", (n, None))
    p = B.shape[1]
    F = as_matrix(F, "F", (n, n))
    G = as_matrix(G, "G", (p, p))

    R = _symmetrize(F)
    step = np.inf
    for it in range(1, int(opts.max_iterations) + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            R_next = riccati_map(R, A, B, F, G)
        if not np.all(np.isfinite(R_next)):
            raise NonConvergence("Riccati iteration diverged", it, step)
        # R_next - R is exactly the residual of R, so R is what gets returned
        step = float(np.max(np.abs(R_next - R)))
        if converged(step, R, opts.tolerance):
            return R
        R = R_next
    raise NonConvergence(
        f"Riccati iteration did not converge in {opts.max_iterations} iterations "
        f"(last step {step:.3e})",
        opts.max_iterations,
        step,
    )


def solve_discrete_lyapunov(L, Q, opts=DEFAULT_OPTIONS):
    """Return X with X = L X L' + Q, i.e. the series sum_j L^j Q (L^j)'."""
    L = as_matrix(L, "L")
    n = _square(L, "L")
    Q = as_matrix(Q, "Q", (n, n))
    rho = spectral_radius(L)
    if rho >= 1.0:
        raise UnstableOperator(f"spectral radius {rho:.6g} >= 1; series does not converge")

    Q = _symmetrize(Q)
    X = Q
    step = np.inf
    for it in range(1, int(opts.max_iterations) + 1):
        X_next = _symmetrize(L @ X @ L.T + Q)
        step = float(np.max(np.abs(X_next - X)))
        if converged(step, X, opts.tolerance):
            return X
        X = X_next
    raise NonConvergence(
        f"Lyapunov iteration did not converge in {opts.max_iterations} iterations "
        f"(last step {step:.3e})",
        opts.max_iterations,
        step,
    )


def spectral_radius(M):
    """Largest eigenvalue modulus of a square matrix."""
    M = as_matrix(M, "M")
    _square(M, "M")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def psd_factor(cov, name="cov"):
    """Return S with S S' = cov, clipping tiny negative eigenvalues to zero.

    Raises NotPSD when an eigenvalue is below ``-1e-10 * ||cov||``.
    """
    cov = as_matrix(cov, name)
    _square(cov, name)
    if not np.allclose(cov, cov.T, rtol=1e-9, atol=1e-12):
        raise NotPSD(f"{name} is not symmetric")
    cov = _symmetrize(cov)
    scale = np.linalg.norm(cov, 2)
    if scale == 0.0:
        return np.zeros_like(cov)
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] < -PSD_TOL * scale:
        raise NotPSD(f"{name} has eigenvalue {evals[0]:.3e} < 0")
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def sample_gaussian(mean, cov, rng, size=None):
    """Draw from N(mean, cov) as mean + S g with g standard normal.

    With ``size=None`` a single vector is returned; otherwise ``size`` rows
    (int or tuple) are drawn, consuming the generator exactly as repeated
    single draws would.
    """
    S = psd_factor(cov)
    d = S.shape[0]
    mean = as_vector(mean, d, "mean")
    if size is None:
        g = rng.standard_normal(d)
        return mean + S @ g
    shape = (size,) if np.isscalar(size) else tuple(size)
    g = rng.standard_normal(shape + (d,))
    return mean + g @ S.T


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def stream_rngs(seed, run_index, names, purpose=0):
    """Independent named generators for one run.

    Streams depend only on ``(seed, purpose, run_index)`` and the position
    of each name, so a run reproduces regardless of which other runs were
    executed or in what order.
    """
    root = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(run_index)))
    children = root.spawn(len(names))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(names, children)}
