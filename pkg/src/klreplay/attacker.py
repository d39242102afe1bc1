"""Record-and-replay adversary on the sensor channel.

The attacker stores measurements y(k) for record_from <= k < attack_start
and from attack_start on delivers the recording instead of the live value.
Delivered values are y(k - T) with T = attack_start - record_from until the
buffer is exhausted; then the buffer is replayed cyclically (``wrap``) or
its last entry is held.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBuffer, UsageError, ValidationError
from .numerics import spectral_radius

__all__ = [
    "AttackSchedule",
    "ReplayAttacker",
    "observe",
    "intercept",
    "replay_index",
    "virtual_gain_matrix",
    "stealthiness_classification",
]

ATTACK_MODES = ("none", "replay")


@dataclass(frozen=True)
class AttackSchedule:
    mode: str = "none"
    record_from: int = 0
    attack_start: int = 10
    wrap: bool = True

    def __post_init__(self):
        if self.mode not in ATTACK_MODES:
            raise ValidationError(f"attack mode must be one of {ATTACK_MODES}, got {self.mode!r}")
        if self.record_from < 0:
            raise ValidationError("record_from must be >= 0")
        if self.mode == "replay" and not self.record_from < self.attack_start:
            raise ValidationError("record_from must be < attack_start")

    @property
    def active(self):
        return self.mode == "replay"

    @property
    def time_shift(self):
        return self.attack_start - self.record_from


def replay_index(k, record_from, attack_start, length, wrap):
    """Absolute time index of the recording delivered at step k >= attack_start."""
    j = k - attack_start
    j = j % length if wrap else min(j, length - 1)
    return record_from + j


@dataclass
class ReplayAttacker:
    record_from: int
    attack_start: int
    wrap: bool = True
    enabled: bool = True
    buffer: list = field(default_factory=list)
    last_k: int = -1

    def __post_init__(self):
        if self.enabled and not 0 <= self.record_from < self.attack_start:
            raise ValidationError("need 0 <= record_from < attack_start")

    @classmethod
    def from_schedule(cls, schedule):
        return cls(
            record_from=schedule.record_from,
            attack_start=schedule.attack_start,
            wrap=schedule.wrap,
            enabled=schedule.active,
        )

    @property
    def time_shift(self):
        return self.attack_start - self.record_from


def observe(attacker, k, y):
    """Record y(k) if k lies in the recording interval. Steps must increase."""
    if k <= attacker.last_k:
        raise UsageError(f"observe called with k={k} after k={attacker.last_k}")
    attacker.last_k = k
    if attacker.enabled and attacker.record_from <= k < attacker.attack_start:
        attacker.buffer.append(np.array(y, dtype=float))
    return attacker


def intercept(attacker, k, y_true):
    """The measurement the estimator actually receives at step k."""
    if not attacker.enabled or k < attacker.attack_start:
        return np.array(y_true, dtype=float)
    if not attacker.buffer:
        raise EmptyBuffer(f"replay active at k={k} but nothing was recorded")
    j = replay_index(k, 0, attacker.attack_start, len(attacker.buffer), attacker.wrap)
    return attacker.buffer[j].copy()


def virtual_gain_matrix(model, design, gains):
    """(A + BM)(I - beta K C): how estimate mismatches propagate under replay."""
    n = model.n
    return (model.A + model.B @ design.M) @ (np.eye(n) - gains.beta * gains.K @ model.C)


def stealthiness_classification(model, design, gains):
    """``"stealthy"`` if the replay operator is stable, else ``"detectable"``."""
    rho = spectral_radius(virtual_gain_matrix(model, design, gains))
    return "stealthy" if rho < 1.0 else "detectable"
