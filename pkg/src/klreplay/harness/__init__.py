"""Scenario configuration, closed-loop simulation and Monte Carlo tooling."""

from .config import ScenarioConfig, dump_scenario, load_scenario, parse_scenario
from .engine import (
    LoopGains,
    SimulationTrace,
    Thresholds,
    prepare,
    run_scenario,
    run_scenario_stepwise,
    simulate,
)
from .montecarlo import (
    Calibration,
    MonteCarloReport,
    calibrate,
    estimation_error_trace_series,
    iter_traces,
    median_delay,
    resolve_thresholds,
    run_monte_carlo,
)
from .output import summary, write_report
from .presets import PRESETS, preset, preset_variants
from .scan import tau_tradeoff_scan
