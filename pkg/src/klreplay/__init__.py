"""Replay-attack simulation for a packet-dropout LQG loop with a
Kullback-Leibler innovation detector and physical watermarking."""

__version__ = "0.1.0"

from . import attacker, controller, detector, estimator, numerics, plant
from .errors import *  # noqa: F401,F403
