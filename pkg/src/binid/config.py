"""Experiment configuration: a sectioned TOML file mapped onto dataclasses.

Example::

    [plant]
    theta = [0.5, -0.5]
    threshold = 0.0          # or a list, cycled over k

    [noise]
    family = "gaussian-constant"   # or "gaussian-logdecay"
    sigma = 1.0

    [excitation]
    kind = "decaying-gaussian"     # constant-gaussian | from-controller | from-file
    exponent = 0.25

    [domain]
    lo = [-2.0, -2.0]
    hi = [2.0, 2.0]

    [bounds]
    M = 0.5
    C = 0.0

    [estimator]
    theta0 = [1.0, -1.0]
    beta0 = 0.146            # or "auto"
    p0 = "identity"          # or a list giving the diagonal

    [control]
    enabled = false
    y_star = 1.0
    gain_floor = 0.3

    [run]
    n = 100000
    seeds = 20
    base_seed = 0
    stride = 10

    [output]
    directory = "out"
    emit_plots = true
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import tomli

from .adaptation import DEFAULT_GAIN_FLOOR
from .errors import ConfigError, InvalidConfig, NonpositiveDensity
from .estimator import EstimatorConfig
from .geometry import ConvexBox
from .noise import GaussianConstant, GaussianSchedule, NoiseModel

NOISE_FAMILIES = ("gaussian-constant", "gaussian-logdecay")
EXCITATION_KINDS = ("decaying-gaussian", "constant-gaussian", "from-controller", "from-file")
AUTO_BETA_FRACTION = 0.99


@dataclass(frozen=True)
class PlantSpec:
    theta: tuple
    threshold: Union[float, tuple] = 0.0
    noise_family: str = "gaussian-constant"
    sigma: float = 1.0

    def noise_model(self) -> NoiseModel:
        if self.noise_family == "gaussian-constant":
            return GaussianConstant(self.sigma)
        return GaussianSchedule.log_decay(self.sigma)

    def thresholds(self) -> tuple:
        t = self.threshold
        return tuple(t) if isinstance(t, (list, tuple)) else (float(t),)


@dataclass(frozen=True)
class ExcitationSpec:
    kind: str = "decaying-gaussian"
    exponent: float = 0.25
    file: Optional[str] = None


@dataclass(frozen=True)
class EstimatorSpec:
    lo: tuple
    hi: tuple
    theta0: tuple
    M: float
    C: float = 0.0
    beta0: Union[float, str] = "auto"
    p0: Union[str, tuple] = "identity"

    def P0(self) -> np.ndarray:
        p = len(self.lo)
        if self.p0 == "identity":
            return np.eye(p)
        return np.diag(np.asarray(self.p0, dtype=float))


@dataclass(frozen=True)
class ControlSpec:
    enabled: bool = False
    y_star: float = 1.0
    gain_floor: float = DEFAULT_GAIN_FLOOR
    reference_file: Optional[str] = None


@dataclass(frozen=True)
class RunSpec:
    n: int = 100_000
    seeds: int = 20
    base_seed: int = 0
    stride: int = 10
    full_until: int = 10_000
    checkpoints: tuple = (100, 1_000, 10_000, 100_000)
    workers: int = 0  # 0 -> os.cpu_count()


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    emit_plots: bool = True
    name: str = "run"


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantSpec
    excitation: ExcitationSpec
    estimator: EstimatorSpec
    control: ControlSpec = field(default_factory=ControlSpec)
    run: RunSpec = field(default_factory=RunSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def dim(self) -> int:
        return len(self.plant.theta)

    def domain(self) -> ConvexBox:
        return ConvexBox(self.estimator.lo, self.estimator.hi)

    def estimator_config(self) -> EstimatorConfig:
        est = self.estimator
        noise = self.plant.noise_model()
        domain = self.domain()
        beta0 = est.beta0
        if beta0 == "auto":
            radius = domain.radius * est.M + est.C
            beta0 = AUTO_BETA_FRACTION * min(1.0, noise.inf_density(1, radius))
        return EstimatorConfig(
            domain=domain, regressor_bound=est.M, threshold_bound=est.C,
            noise=noise, beta0=float(beta0), P0=est.P0(), theta0=np.asarray(est.theta0, float),
        )

    def validate(self) -> EstimatorConfig:
        """Check every cross-field invariant; returns the estimator config."""
        p = self.dim
        for name, vec in (("domain.lo", self.estimator.lo), ("domain.hi", self.estimator.hi),
                          ("estimator.theta0", self.estimator.theta0)):
            if len(vec) != p:
                raise ConfigError(f"expected {p} entries to match plant.theta", key=name)
        if self.plant.noise_family not in NOISE_FAMILIES:
            raise ConfigError(f"unknown family, expected one of {NOISE_FAMILIES}", key="noise.family")
        if not self.plant.sigma > 0:
            raise ConfigError("must be positive", key="noise.sigma")
        if self.excitation.kind not in EXCITATION_KINDS:
            raise ConfigError(f"unknown kind, expected one of {EXCITATION_KINDS}", key="excitation.kind")
        if self.excitation.kind in ("decaying-gaussian", "constant-gaussian") and p != 2:
            raise ConfigError("gaussian excitation builds phi = (1, u) and needs p = 2",
                              key="excitation.kind")
        if self.excitation.kind == "from-file" and not self.excitation.file:
            raise ConfigError("from-file excitation needs excitation.file", key="excitation.file")
        if self.control.enabled != (self.excitation.kind == "from-controller"):
            raise ConfigError(
                "control.enabled requires excitation.kind = 'from-controller' and vice versa",
                key="control.enabled",
            )
        if self.control.enabled and p != 2:
            raise ConfigError("the tracking controller uses phi = (1, u) and needs p = 2",
                              key="control.enabled")
        if not self.control.gain_floor > 0:
            raise ConfigError("must be positive", key="control.gain_floor")
        if self.run.n < 0:
            raise ConfigError("must be nonnegative", key="run.n")
        if self.run.seeds < 1:
            raise ConfigError("must be at least 1", key="run.seeds")
        if self.run.stride < 1:
            raise ConfigError("must be at least 1", key="run.stride")
        if isinstance(self.estimator.p0, tuple) and len(self.estimator.p0) != p:
            raise ConfigError(f"diagonal needs {p} entries", key="estimator.p0")
        try:
            domain = self.domain()
        except ValueError as exc:
            raise ConfigError(str(exc), key="domain") from None
        if not domain.contains(self.plant.theta):
            raise ConfigError("true parameter lies outside the parameter box", key="plant.theta")
        for c in self.plant.thresholds():
            if abs(c) > self.estimator.C:
                raise ConfigError(f"threshold {c:g} exceeds the bound C={self.estimator.C:g}",
                                  key="plant.threshold")
        try:
            return self.estimator_config()
        except InvalidConfig as exc:
            key = "estimator.beta0" if "beta0" in str(exc) else "estimator"
            raise ConfigError(str(exc), key=key) from None
        except NonpositiveDensity as exc:
            raise ConfigError(str(exc), key="bounds") from None

    def with_overrides(self, **run_fields) -> "ExperimentConfig":
        out_fields = {k: run_fields.pop(k) for k in ("directory", "emit_plots") if k in run_fields}
        cfg = self
        if run_fields:
            cfg = replace(cfg, run=replace(cfg.run, **run_fields))
        if out_fields:
            cfg = replace(cfg, output=replace(cfg.output, **out_fields))
        return cfg


# ---------------------------------------------------------------------------
# file I/O

_SCHEMA = {
    "plant": {"theta": "vector", "threshold": "threshold"},
    "noise": {"family": str, "sigma": float},
    "excitation": {"kind": str, "exponent": float, "file": str},
    "domain": {"lo": "vector", "hi": "vector"},
    "bounds": {"M": float, "C": float},
    "estimator": {"theta0": "vector", "beta0": "beta0", "p0": "p0"},
    "control": {"enabled": bool, "y_star": float, "gain_floor": float, "reference_file": str},
    "run": {"n": int, "seeds": int, "base_seed": int, "stride": int, "full_until": int,
            "checkpoints": "intlist", "workers": int},
    "output": {"directory": str, "emit_plots": bool, "name": str},
}
_REQUIRED = ("plant.theta", "domain.lo", "domain.hi", "bounds.M", "estimator.theta0", "run.n")


def _key_line(text: str, section: str, key: str) -> Optional[int]:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _coerce(value: Any, kind, name: str, line):
    def bad(expected):
        return ConfigError(f"expected {expected}, got {value!r}", key=name, line=line)

    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise bad("true or false")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise bad("a string")
        return value
    if kind == "vector":
        if not isinstance(value, list) or not value or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise bad("a non-empty list of numbers")
        return tuple(float(v) for v in value)
    if kind == "intlist":
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise bad("a list of integers")
        return tuple(value)
    if kind == "threshold":
        if isinstance(value, list):
            return _coerce(value, "vector", name, line)
        return _coerce(value, float, name, line)
    if kind == "beta0":
        if value == "auto":
            return value
        return _coerce(value, float, name, line)
    if kind == "p0":
        if value == "identity":
            return value
        return _coerce(value, "vector", name, line)
    raise AssertionError(kind)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse config text; errors name the offending key and line."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: malformed config: {exc}", line=getattr(exc, "lineno", None)) from None

    values: dict[str, Any] = {}
    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section)
        if not isinstance(body, dict):
            raise ConfigError("expected a [section]", key=section)
        for key, value in body.items():
            name = f"{section}.{key}"
            line = _key_line(text, section, key)
            if key not in _SCHEMA[section]:
                raise ConfigError("unknown key", key=name, line=line)
            values[name] = _coerce(value, _SCHEMA[section][key], name, line)
    for name in _REQUIRED:
        if name not in values:
            raise ConfigError("missing required key", key=name)

    def get(name, default=None):
        return values.get(name, default)

    run_defaults = RunSpec()
    cfg = ExperimentConfig(
        plant=PlantSpec(
            theta=get("plant.theta"),
            threshold=get("plant.threshold", 0.0),
            noise_family=get("noise.family", "gaussian-constant"),
            sigma=get("noise.sigma", 1.0),
        ),
        excitation=ExcitationSpec(
            kind=get("excitation.kind", "decaying-gaussian"),
            exponent=get("excitation.exponent", 0.25),
            file=get("excitation.file"),
        ),
        estimator=EstimatorSpec(
            lo=get("domain.lo"), hi=get("domain.hi"), theta0=get("estimator.theta0"),
            M=get("bounds.M"), C=get("bounds.C", 0.0),
            beta0=get("estimator.beta0", "auto"), p0=get("estimator.p0", "identity"),
        ),
        control=ControlSpec(
            enabled=get("control.enabled", False),
            y_star=get("control.y_star", 1.0),
            gain_floor=get("control.gain_floor", DEFAULT_GAIN_FLOOR),
            reference_file=get("control.reference_file"),
        ),
        run=RunSpec(
            n=get("run.n"),
            seeds=get("run.seeds", run_defaults.seeds),
            base_seed=get("run.base_seed", run_defaults.base_seed),
            stride=get("run.stride", run_defaults.stride),
            full_until=get("run.full_until", run_defaults.full_until),
            checkpoints=get("run.checkpoints", run_defaults.checkpoints),
            workers=get("run.workers", run_defaults.workers),
        ),
        output=OutputSpec(
            directory=get("output.directory", "out"),
            emit_plots=get("output.emit_plots", True),
            name=get("output.name", "run"),
        ),
    )
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
            return f"{v:.1f}"
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(type(v))


def dump_config(cfg: ExperimentConfig) -> str:
    sections = {
        "plant": {"theta": cfg.plant.theta, "threshold": cfg.plant.threshold},
        "noise": {"family": cfg.plant.noise_family, "sigma": cfg.plant.sigma},
        "excitation": {"kind": cfg.excitation.kind, "exponent": cfg.excitation.exponent,
                       "file": cfg.excitation.file},
        "domain": {"lo": cfg.estimator.lo, "hi": cfg.estimator.hi},
        "bounds": {"M": cfg.estimator.M, "C": cfg.estimator.C},
        "estimator": {"theta0": cfg.estimator.theta0, "beta0": cfg.estimator.beta0,
                      "p0": cfg.estimator.p0},
        "control": {"enabled": cfg.control.enabled, "y_star": cfg.control.y_star,
                    "gain_floor": cfg.control.gain_floor,
                    "reference_file": cfg.control.reference_file},
        "run": {"n": cfg.run.n, "seeds": cfg.run.seeds, "base_seed": cfg.run.base_seed,
                "stride": cfg.run.stride, "full_until": cfg.run.full_until,
                "checkpoints": list(cfg.run.checkpoints), "workers": cfg.run.workers},
        "output": {"directory": cfg.output.directory, "emit_plots": cfg.output.emit_plots,
                   "name": cfg.output.name},
    }
    lines = []
    for section, body in sections.items():
        lines.append(f"[{section}]")
        for key, value in body.items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def read_column(path, what: str) -> list[list[float]]:
    """Rows of floats from a CSV/whitespace file; '#' lines are comments."""
    rows = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path}: {exc.strerror}") from None
    for i, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(x) for x in re.split(r"[,\s]+", line) if x])
        except ValueError:
            raise ConfigError(f"non-numeric entry in {what} file {path}", line=i) from None
    return rows

