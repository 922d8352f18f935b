"""Experiment configuration: defaults, INI loading and validation.

Config files are INI with one section per namespace; ``[problem] alpha = 0.5``
sets the flat key ``problem.alpha``. Command-line flags override file values.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

from ..errors import ParameterError

__all__ = ["ExperimentConfig", "KEYS", "load_config_file", "parse_float_list", "KINDS"]

KINDS = ("fode", "pde", "sweep", "truncation", "eigen", "verify")


def parse_float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError as exc:
        raise ParameterError(f"malformed number list {text!r}") from exc


def _optional_float(text: str) -> float | None:
    if text.strip().lower() in ("", "none", "inf", "untruncated"):
        return None
    return float(text)


def _exponent(text: str) -> str | float:
    t = text.strip()
    return t if t in ("hardy", "printed") else float(t)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "pde"
    # scalar problem
    alpha: float = 0.5
    q: float = 2.0
    u0: float = 1.0
    scheme: str = "trapezoid"
    # radial problem
    n: float = 4.0
    p: float = 3.0
    R: float = 1.0
    mu_ratio: float = 0.5
    N: float | None = 1.0e4
    boundary_exponent: str | float = "hardy"
    amplitude: float = 1.0
    sigma: float | None = None
    # discretization
    m: int = 200
    steps: int = 2000
    horizon: float = 1.0
    grading: float = 1.0
    # blow-up thresholds
    l2_threshold: float = 1.0e6
    w1p_threshold: float = 1.0e6
    # experiments
    mu_ratios: tuple[float, ...] = (0.25, 0.5, 0.75, 1.5, 2.0, 4.0)
    schedule: tuple[float, ...] = (100.0, 1000.0, 10000.0, 100000.0, 1000000.0)
    trials: int = 200
    slack: float = 1.0
    hardy_slack: float = 0.01
    step_list: tuple[float, ...] = (128.0, 256.0, 512.0)
    min_order: float = 0.8
    workers: int = 1
    seed: int = 0
    output_dir: str | None = field(default=None, compare=False)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def mu(self) -> float:
        return self.mu_ratio * ((self.n - self.p) / self.p) ** self.p

    def validate(self) -> "ExperimentConfig":
        """Raise :class:`ParameterError` on any out-of-domain value."""
        if self.kind not in KINDS:
            raise ParameterError(f"unknown experiment kind {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.q > 1.0:
            raise ParameterError(f"q must exceed 1, got {self.q}")
        if not self.u0 > 0.0:
            raise ParameterError(f"u0 must be positive, got {self.u0}")
        if self.scheme not in ("trapezoid", "l1"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if not self.p > 2.0:
            raise ParameterError(f"p must exceed 2, got {self.p}")
        if not self.n > self.p:
            raise ParameterError(f"need n > p, got n={self.n}, p={self.p}")
        if not self.R > 0.0:
            raise ParameterError("R must be positive")
        if not self.mu_ratio >= 0.0:
            raise ParameterError("mu must be nonnegative")
        if self.N is not None and not self.N >= 1.0:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        if any(not x >= 0.0 for x in self.mu_ratios):
            raise ParameterError("mu ratios must be nonnegative")
        if any(not x >= 1.0 for x in self.schedule):
            raise ParameterError("truncation levels must be >= 1")
        if self.m < 2 or self.steps < 1:
            raise ParameterError("need m >= 2 and steps >= 1")
        if any(x < 2 or x != int(x) for x in self.step_list):
            raise ParameterError("step list entries must be integers >= 2")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ParameterError("horizon must be positive and finite")
        if not self.grading >= 1.0:
            raise ParameterError("grading exponent must be >= 1")
        if not (self.l2_threshold > 0 and self.w1p_threshold > 0):
            raise ParameterError("thresholds must be positive")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if not self.slack > 0 or not 0 <= self.hardy_slack < 1:
            raise ParameterError("slack factors out of range")
        if self.sigma is not None and not self.sigma >= 0:
            raise ParameterError("sigma must be nonnegative")
        if not math.isfinite(self.amplitude):
            raise ParameterError("amplitude must be finite")
        return self

    def snapshot(self) -> dict:
        """Config as a JSON-ready dict keyed by namespaced names (no output path)."""
        out = {}
        for name, (key, _) in KEYS.items():
            value = getattr(self, name)
            out[key] = list(value) if isinstance(value, tuple) else value
        return dict(sorted(out.items()))


# field -> (namespaced key, parser for file values)
KEYS: dict[str, tuple[str, object]] = {
    "kind": ("run.kind", str),
    "seed": ("run.seed", int),
    "workers": ("run.workers", int),
    "alpha": ("problem.alpha", float),
    "q": ("problem.q", float),
    "u0": ("problem.u0", float),
    "scheme": ("problem.scheme", str),
    "n": ("problem.n", float),
    "p": ("problem.p", float),
    "R": ("problem.R", float),
    "mu_ratio": ("problem.mu_ratio", float),
    "N": ("problem.N", _optional_float),
    "boundary_exponent": ("problem.boundary_exponent", _exponent),
    "amplitude": ("problem.amplitude", float),
    "sigma": ("problem.sigma", _optional_float),
    "m": ("grid.m", int),
    "steps": ("grid.steps", int),
    "horizon": ("grid.horizon", float),
    "grading": ("grid.grading", float),
    "l2_threshold": ("blowup.l2_threshold", float),
    "w1p_threshold": ("blowup.w1p_threshold", float),
    "mu_ratios": ("sweep.mu_ratios", parse_float_list),
    "schedule": ("truncation.schedule", parse_float_list),
    "trials": ("verify.trials", int),
    "slack": ("verify.slack", float),
    "hardy_slack": ("verify.hardy_slack", float),
    "step_list": ("verify.step_list", parse_float_list),
    "min_order": ("verify.min_order", float),
}

_BY_KEY = {key: (name, parse) for name, (key, parse) in KEYS.items()}


def load_config_file(path: str) -> dict:
    """Read an INI file into ``{field name: value}``; unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        for option, raw in parser.items(section):
            key = f"{section}.{option}"
            if key not in _BY_KEY:
                raise ParameterError(f"unknown config key {key!r}")
            name, parse = _BY_KEY[key]
            try:
                values[name] = parse(raw)
            except (TypeError, ValueError) as exc:
                raise ParameterError(f"bad value for {key}: {raw!r}") from exc
    return values
