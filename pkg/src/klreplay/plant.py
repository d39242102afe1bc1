"""Ground-truth linear plant with Gaussian process and measurement noise."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPSD, ValidationError
from .numerics import as_matrix, as_vector, psd_factor, sample_gaussian

__all__ = [
    "SystemModel",
    "PlantState",
    "plant_step",
    "measure",
    "propagate",
    "output",
    "scalar_model",
    "two_state_model",
]


@dataclass(frozen=True, eq=False)
class SystemModel:
    """x(k+1) = A x(k) + B u(k) + w(k),  y(k) = C x(k) + v(k).

    w ~ N(0, W), v ~ N(0, V), mutually independent. W and V only need to
    be PSD here; a singular V is allowed for noise-free test plants.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B = as_matrix(self.B, "B", (n, None))
        C = as_matrix(self.C, "C", (None, n))
        W = as_matrix(self.W, "W", (n, n))
        V = as_matrix(self.V, "V", (C.shape[0], C.shape[0]))
        for name, mat in (("W", W), ("V", V)):
            try:
                psd_factor(mat, name)
            except NotPSD as exc:
                raise ValidationError(f"{name} must be symmetric PSD: {exc}") from None
        for name, mat in (("A", A), ("B", B), ("C", C), ("W", W), ("V", V)):
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    @property
    def m(self):
        return self.C.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SystemModel):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("A", "B", "C", "W", "V")
        )

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("A", "B", "C", "W", "V")}


@dataclass(frozen=True)
class PlantState:
    x: np.ndarray
    k: int = 0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("plant state has non-finite entries")
        object.__setattr__(self, "x", x)


def propagate(model, x, u, w):
    """Noise-explicit state update A x + B u + w."""
    return model.A @ x + model.B @ u + w


def output(model, x, v):
    return model.C @ x + v


def plant_step(model, state, u, rng):
    """Advance the plant one step, drawing w ~ N(0, W) from ``rng``."""
    x = as_vector(state.x, model.n, "x")
    u = as_vector(u, model.p, "u")
    w = sample_gaussian(np.zeros(model.n), model.W, rng)
    return PlantState(propagate(model, x, u, w), state.k + 1)


def measure(model, state, rng):
    """y = C x + v with v ~ N(0, V) drawn from ``rng``."""
    x = as_vector(state.x, model.n, "x")
    v = sample_gaussian(np.zeros(model.m), model.V, rng)
    return output(model, x, v)


def scalar_model():
    """A = B = C = W = V = [1]; with F = G = 1 its LQG gain is -0.6180."""
    one = [[1.0]]
    return SystemModel(A=one, B=one, C=one, W=one, V=one)


def two_state_model():
    """Two-state, two-output, two-input example used with the 2x2 watermark.

    A lightly damped rotation; C = I so m = 2 and every watermark direction
    reaches the innovations.
    """
    A = [[0.9, 0.2], [-0.2, 0.9]]
    eye = [[1.0, 0.0], [0.0, 1.0]]
    return SystemModel(A=A, B=eye, C=eye, W=eye, V=eye)
