"""Scenario configuration and its YAML text format.

A scenario file is a YAML mapping. Matrices are written as lists of rows;
a bare number is accepted for a 1x1 matrix. Every key is optional::

    name: my-experiment
    model:                     # default: the scalar plant A=B=C=W=V=[1]
      A: [[1.0]]
      B: [[1.0]]
      C: [[1.0]]
      W: [[1.0]]
      V: [[1.0]]
    x_bar0: [0.0]              # initial state mean (default zeros)
    beta: 1.0                  # packet-dropout coefficient in (0, 1]
    beta_mode: fixed           # fixed | bernoulli
    weights:
      F: [[1.0]]               # default identity
      G: [[1.0]]               # default identity
    watermark:
      tau: [[1.0]]             # default zero (no watermark)
      active_from: 0
    attack:
      mode: replay             # none | replay
      record_from: 0
      attack_start: 10
      wrap: true
    horizon: 2000
    window_capacity: 100
    warmup: null               # default max(window_capacity, 50)
    kl_threshold: calibrate    # number or "calibrate"
    chi2_significance: 0.01
    chi2_threshold: analytic   # analytic | calibrate | number
    seed: 0
    runs: 1
"""

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from ..attacker import AttackSchedule
from ..controller import Watermark
from ..errors import KLReplayError, ParseError, ValidationError
from ..estimator import BETA_MODES
from ..plant import SystemModel, scalar_model

__all__ = ["ScenarioConfig", "load_scenario", "parse_scenario", "dump_scenario"]

TOP_KEYS = {
    "name", "model", "x_bar0", "beta", "beta_mode", "weights", "watermark", "attack",
    "horizon", "window_capacity", "warmup", "kl_threshold", "chi2_significance",
    "chi2_threshold", "seed", "runs",
}
SECTION_KEYS = {
    "model": {"A", "B", "C", "W", "V"},
    "weights": {"F", "G"},
    "watermark": {"tau", "active_from"},
    "attack": {"mode", "record_from", "attack_start", "wrap"},
}


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    model: SystemModel = field(default_factory=scalar_model)
    beta: float = 1.0
    beta_mode: str = "fixed"
    F: np.ndarray = None
    G: np.ndarray = None
    watermark: Watermark = None
    attack: AttackSchedule = field(default_factory=AttackSchedule)
    horizon: int = 2000
    window_capacity: int = 100
    warmup: int = None
    kl_threshold: object = "calibrate"
    chi2_significance: float = 0.01
    chi2_threshold: object = "analytic"
    seed: int = 0
    runs: int = 1
    x_bar0: np.ndarray = None
    name: str = "scenario"

    def __post_init__(self):
        n, p = self.model.n, self.model.p
        fill = {
            "F": np.eye(n) if self.F is None else np.array(self.F, dtype=float),
            "G": np.eye(p) if self.G is None else np.array(self.G, dtype=float),
            "watermark": Watermark.off(p) if self.watermark is None else self.watermark,
            "x_bar0": np.zeros(n) if self.x_bar0 is None else np.array(self.x_bar0, dtype=float).reshape(-1),
        }
        for key, value in fill.items():
            object.__setattr__(self, key, value)
        self.validate()

    def validate(self):
        n, p = self.model.n, self.model.p
        if self.F.shape != (n, n):
            raise ValidationError(f"F must be {n}x{n}, got {self.F.shape}")
        if self.G.shape != (p, p):
            raise ValidationError(f"G must be {p}x{p}, got {self.G.shape}")
        if not np.allclose(self.F, self.F.T) or np.linalg.eigvalsh(self.F)[0] < -1e-12:
            raise ValidationError("F must be symmetric PSD")
        if not np.allclose(self.G, self.G.T) or np.linalg.eigvalsh(self.G)[0] <= 0:
            raise ValidationError("G must be symmetric positive definite")
        if self.watermark.tau.shape != (p, p):
            raise ValidationError(f"tau must be {p}x{p}, got {self.watermark.tau.shape}")
        if self.x_bar0.shape != (n,):
            raise ValidationError(f"x_bar0 must have length {n}")
        if not 0.0 < self.beta <= 1.0:
            raise ValidationError("beta must lie in (0, 1]")
        if self.beta_mode not in BETA_MODES:
            raise ValidationError(f"beta_mode must be one of {BETA_MODES}")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.window_capacity < 1:
            raise ValidationError("window_capacity must be >= 1")
        if self.warmup is not None and self.warmup < 0:
            raise ValidationError("warmup must be >= 0")
        if self.runs < 1:
            raise ValidationError("runs must be >= 1")
        if not 0.0 < self.chi2_significance < 1.0:
            raise ValidationError("chi2_significance must lie in (0, 1)")
        if not (self.kl_threshold == "calibrate" or isinstance(self.kl_threshold, float)):
            raise ValidationError("kl_threshold must be a number or 'calibrate'")
        if not (self.chi2_threshold in ("analytic", "calibrate") or isinstance(self.chi2_threshold, float)):
            raise ValidationError("chi2_threshold must be a number, 'analytic' or 'calibrate'")
        if self.attack.active and self.attack.attack_start >= self.horizon:
            raise ValidationError(
                f"attack_start ({self.attack.attack_start}) must be < horizon ({self.horizon})"
            )

    @property
    def effective_warmup(self):
        return max(self.window_capacity, 50) if self.warmup is None else self.warmup

    def with_(self, **changes):
        return replace(self, **changes)

    def without_attack(self):
        return replace(self, attack=replace(self.attack, mode="none"))

    def to_dict(self):
        return {
            "name": self.name,
            "model": self.model.to_dict(),
            "x_bar0": self.x_bar0.tolist(),
            "beta": self.beta,
            "beta_mode": self.beta_mode,
            "weights": {"F": self.F.tolist(), "G": self.G.tolist()},
            "watermark": {
                "tau": self.watermark.tau.tolist(),
                "active_from": self.watermark.active_from,
            },
            "attack": {
                "mode": self.attack.mode,
                "record_from": self.attack.record_from,
                "attack_start": self.attack.attack_start,
                "wrap": self.attack.wrap,
            },
            "horizon": self.horizon,
            "window_capacity": self.window_capacity,
            "warmup": self.warmup,
            "kl_threshold": self.kl_threshold,
            "chi2_significance": self.chi2_significance,
            "chi2_threshold": self.chi2_threshold,
            "seed": self.seed,
            "runs": self.runs,
        }

    def digest(self):
        """SHA-256 of the canonical JSON form of the config."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def dump_scenario(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)


def _key_lines(node, prefix="", out=None):
    """Map dotted key paths to 1-based line numbers from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}{key_node.value}"
            out[path] = key_node.start_mark.line + 1
            _key_lines(value_node, path + ".", out)
    return out


class _Reader:
    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def fail(self, path, message):
        raise ParseError(message, line=self.lines.get(path), field=path)

    def section(self, key):
        value = self.data.get(key)
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(key, "expected a mapping")
        unknown = set(value) - SECTION_KEYS[key]
        if unknown:
            bad = sorted(map(str, unknown))[0]
            self.fail(f"{key}.{bad}", f"unknown key; allowed: {sorted(SECTION_KEYS[key])}")
        return value

    def matrix(self, value, path):
        if isinstance(value, bool):
            self.fail(path, "expected a matrix (list of rows)")
        if isinstance(value, (int, float)):
            return np.array([[float(value)]])
        if not isinstance(value, list) or not value:
            self.fail(path, "expected a matrix written as a list of rows")
        rows = [row if isinstance(row, list) else [row] for row in value]
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            self.fail(path, "matrix rows have different lengths")
        try:
            arr = np.array(rows, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, "matrix entries must be numbers")
        if not np.all(np.isfinite(arr)):
            self.fail(path, "matrix entries must be finite")
        return arr

    def vector(self, value, path):
        if not isinstance(value, list):
            value = [value]
        try:
            return np.array(value, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, "expected a list of numbers")

    def number(self, value, path, kind=float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if kind is int:
            if isinstance(value, int):
                return value
            if not value.is_integer():
                self.fail(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)


def parse_scenario(text):
    """Parse scenario text into a validated :class:`ScenarioConfig`."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ParseError(f"malformed scenario text: {getattr(exc, 'problem', exc)}", line=line) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError("scenario must be a mapping of keys to values", line=1)
    rd = _Reader(data, _key_lines(node))
    unknown = set(data) - TOP_KEYS
    if unknown:
        bad = sorted(map(str, unknown))[0]
        rd.fail(bad, f"unknown key; allowed: {sorted(TOP_KEYS)}")

    kwargs = {}
    try:
        model_sec = rd.section("model")
        if model_sec:
            base = scalar_model()
            mats = {k: getattr(base, k) for k in ("A", "B", "C", "W", "V")}
            for key, value in model_sec.items():
                mats[key] = rd.matrix(value, f"model.{key}")
            kwargs["model"] = SystemModel(**mats)
        weights = rd.section("weights")
        for key in ("F", "G"):
            if key in weights:
                kwargs[key] = rd.matrix(weights[key], f"weights.{key}")

        wm = rd.section("watermark")
        if wm:
            p = kwargs.get("model", scalar_model()).p
            tau = rd.matrix(wm["tau"], "watermark.tau") if "tau" in wm else np.zeros((p, p))
            if tau.shape[0] == tau.shape[1] and not np.allclose(tau, tau.T):
                raise ValidationError("tau must be symmetric")
            active = rd.number(wm.get("active_from", 0), "watermark.active_from", int)
            kwargs["watermark"] = Watermark(tau, active)

        at = rd.section("attack")
        if at:
            wrap = at.get("wrap", True)
            if not isinstance(wrap, bool):
                rd.fail("attack.wrap", "expected true or false")
            kwargs["attack"] = AttackSchedule(
                mode=str(at.get("mode", "replay")),
                record_from=rd.number(at.get("record_from", 0), "attack.record_from", int),
                attack_start=rd.number(at.get("attack_start", 10), "attack.attack_start", int),
                wrap=wrap,
            )

        if "x_bar0" in data:
            kwargs["x_bar0"] = rd.vector(data["x_bar0"], "x_bar0")
        for key in ("beta", "chi2_significance"):
            if key in data:
                kwargs[key] = rd.number(data[key], key)
        for key in ("horizon", "window_capacity", "seed", "runs"):
            if key in data:
                kwargs[key] = rd.number(data[key], key, int)
        if data.get("warmup") is not None:
            kwargs["warmup"] = rd.number(data["warmup"], "warmup", int)
        if "beta_mode" in data:
            kwargs["beta_mode"] = str(data["beta_mode"])
        if "name" in data:
            kwargs["name"] = str(data["name"])
        if "kl_threshold" in data:
            value = data["kl_threshold"]
            kwargs["kl_threshold"] = value if value == "calibrate" else rd.number(value, "kl_threshold")
        if "chi2_threshold" in data:
            value = data["chi2_threshold"]
            kwargs["chi2_threshold"] = (
                value if value in ("analytic", "calibrate") else rd.number(value, "chi2_threshold")
            )
        return ScenarioConfig(**kwargs)
    except ParseError:
        raise
    except KLReplayError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from None
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def load_scenario(source):
    """Load a scenario from a file path or directly from scenario text."""
    if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source and os.path.isfile(source)
    ):
        text = Path(source).read_text()
    else:
        text = source
    return parse_scenario(text)
