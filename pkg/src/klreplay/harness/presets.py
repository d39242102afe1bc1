"""Ready-made scenarios reproducing the qualitative content of each figure.

Horizon 2000 and 500 runs are implementation choices. The figure presets
use the replay schedule of the numerical example: the first ten
measurements are recorded and replayed cyclically from step 10 on.
"""

from ..attacker import AttackSchedule
from ..controller import Watermark
from ..errors import UnknownPreset
from ..plant import scalar_model, two_state_model
from .config import ScenarioConfig

__all__ = ["PRESETS", "preset", "preset_variants", "PAPER_TAU", "FIGURE_HORIZON", "FIGURE_RUNS"]

FIGURE_HORIZON = 2000
FIGURE_RUNS = 500
ATTACK_STEP = 10
PAPER_TAU = [[1.1721, 0.3146], [0.3146, 1.0229]]

_replay_at_10 = AttackSchedule(mode="replay", record_from=0, attack_start=ATTACK_STEP, wrap=True)


def _figure2():
    return ScenarioConfig(
        name="figure2",
        model=scalar_model(),
        watermark=Watermark([[0.0]]),
        attack=_replay_at_10,
        horizon=FIGURE_HORIZON,
        runs=FIGURE_RUNS,
    )


def _figure3():
    return _figure2().with_(name="figure3")


def _figure4():
    return ScenarioConfig(
        name="figure4",
        model=scalar_model(),
        watermark=Watermark([[1.0]], active_from=0),
        attack=_replay_at_10,
        horizon=FIGURE_HORIZON,
        runs=FIGURE_RUNS,
        warmup=0,
    )


def _figure4_two_state():
    return ScenarioConfig(
        name="figure4_two_state",
        model=two_state_model(),
        watermark=Watermark(PAPER_TAU, active_from=0),
        attack=_replay_at_10,
        horizon=FIGURE_HORIZON,
        runs=FIGURE_RUNS,
        warmup=0,
    )


def _figure5():
    # The replay itself makes the cost diverge on this plant, so the cost
    # comparison is attack-free with the watermark switched on at step 10.
    return ScenarioConfig(
        name="figure5",
        model=scalar_model(),
        watermark=Watermark([[1.0]], active_from=ATTACK_STEP),
        horizon=FIGURE_HORIZON,
        runs=FIGURE_RUNS,
        warmup=0,
    )


def _delay_comparison():
    # The recording is longer than any plausible delay, so detection happens
    # before the replay wraps; both thresholds are calibrated empirically.
    return ScenarioConfig(
        name="delay_comparison",
        model=scalar_model(),
        watermark=Watermark([[1.0]], active_from=0),
        attack=AttackSchedule(mode="replay", record_from=0, attack_start=300, wrap=True),
        horizon=700,
        window_capacity=50,
        kl_threshold="calibrate",
        chi2_threshold="calibrate",
        chi2_significance=0.01,
        runs=FIGURE_RUNS,
    )


PRESETS = {
    "figure2": _figure2,
    "figure3": _figure3,
    "figure4": _figure4,
    "figure4_two_state": _figure4_two_state,
    "figure5": _figure5,
    "delay_comparison": _delay_comparison,
}


def preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def preset_variants(name):
    """The preset plus the reference run it is plotted against, keyed by label."""
    cfg = preset(name)
    if name in ("figure2", "figure3"):
        return {"attack": cfg, "no_attack": cfg.without_attack().with_(name=f"{name}_no_attack")}
    if name == "figure5":
        return {
            "watermark": cfg,
            "no_watermark": cfg.with_(watermark=Watermark.off(cfg.model.p), name="figure5_no_watermark"),
        }
    return {"main": cfg}
