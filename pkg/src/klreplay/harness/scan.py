"""Cost/detectability trade-off of the watermark strength."""

import numpy as np

from ..attacker import virtual_gain_matrix
from ..controller import watermark_penalty
from ..detector import compute_omega, detectability_term, theoretical_attack_kl
from ..numerics import DEFAULT_OPTIONS, as_matrix

__all__ = ["tau_tradeoff_scan", "SCAN_COLUMNS"]

SCAN_COLUMNS = ("scale", "cost_penalty", "detectability", "kl")


def tau_tradeoff_scan(model, design, gains, tau_base, scales, opts=DEFAULT_OPTIONS):
    """Evaluate tau = s * tau_base for each scale s.

    Returns rows ``{"scale", "cost_penalty", "detectability", "kl", "omega"}``
    sorted by scale, where the penalty is Trace[(G + B'RB) tau], the
    detectability term Trace(Sigma^-1 2 C Omega C') and ``kl`` the
    steady-state replay divergence.
    """
    tau_base = as_matrix(tau_base, "tau_base", (model.p, model.p))
    Lambda = virtual_gain_matrix(model, design, gains)
    rows = []
    for s in sorted(float(s) for s in scales):
        if s < 0:
            raise ValueError("scales must be non-negative")
        tau = s * tau_base
        omega = compute_omega(Lambda, model.B, tau, opts)
        rows.append(
            {
                "scale": s,
                "cost_penalty": watermark_penalty(model, design, tau),
                "detectability": detectability_term(gains, model, omega),
                "kl": theoretical_attack_kl(gains, model, omega),
                "omega": np.array(omega),
            }
        )
    return rows
