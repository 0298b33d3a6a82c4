"""Experiment configuration: a single YAML document, validated before any compute.

Documented ranges
-----------------
kind            one of EXPERIMENT_KINDS
p               (7/3, 5)
nonlinearity    block accepted by Nonlinearity.from_config; defaults to pure power p
c               (0, solver.c_ceiling]
c_schedule      non-empty, strictly decreasing, each in (0, solver.c_ceiling]
omega           null or > 0 (branch runs; null means the limit frequency)
radial.rmax_scaled   [8, 200]      radial domain in units of omega0^-1/2
radial.n             [64, 65536]
grid3d.L_scaled      [4, 40]       box half-width in units of omega0^-1/2
grid3d.n             power of two in [16, 96]
solver.tol           (0, 1e-4]
solver.max_iter      [1, 10^6]
solver.tol3d         (0, 1e-2]
solver.max_iter3d    [1, 10^6]
solver.newton_tol    (0, 1e-4]
solver.c_ceiling     (0, 10]
assumptions.q, .l    null or (10/3, 6)
perturbation    [0, 1)
warm_start      bool
output          non-empty path
seed            integer >= 0
threads         integer >= 1
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional

import yaml

from .nonlinearity import P_LOWER, P_UPPER, Nonlinearity, NonlinearityError

EXPERIMENT_KINDS = ("groundstate", "minimize", "branch", "sweep", "check-assumptions",
                    "symmetry3d")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RadialGridConfig:
    rmax_scaled: float = 24.0
    n: int = 2048


@dataclass
class Grid3DConfig:
    L_scaled: float = 8.0
    n: int = 64


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 5000
    tol3d: float = 1e-6
    max_iter3d: int = 2000
    newton_tol: float = 1e-10
    c_ceiling: float = 1.0


@dataclass
class AssumptionConfig:
    q: Optional[float] = None
    l: Optional[float] = None


@dataclass
class ExperimentConfig:
    kind: str = "groundstate"
    p: float = 3.0
    nonlinearity: Optional[dict] = None
    c: float = 1e-3
    c_schedule: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    omega: Optional[float] = None
    radial: RadialGridConfig = field(default_factory=RadialGridConfig)
    grid3d: Grid3DConfig = field(default_factory=Grid3DConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    assumptions: AssumptionConfig = field(default_factory=AssumptionConfig)
    perturbation: float = 0.1
    warm_start: bool = True
    output: str = "results"
    seed: int = 0
    threads: int = 1

    # ------------------------------------------------------------ building

    def build_nonlinearity(self) -> Nonlinearity:
        if self.nonlinearity is None:
            return Nonlinearity.pure_power(self.p)
        return Nonlinearity.from_config(self.nonlinearity)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        data = copy.deepcopy(data or {})
        if not isinstance(data, dict):
            raise ConfigError("<root>", "configuration must be a mapping")
        nested = {"radial": RadialGridConfig, "grid3d": Grid3DConfig,
                  "solver": SolverConfig, "assumptions": AssumptionConfig}
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key in nested:
                sub = nested[key]
                if value is None:
                    value = {}
                if not isinstance(value, dict):
                    raise ConfigError(key, "expected a mapping")
                sub_known = {f.name for f in fields(sub)}
                for k in value:
                    if k not in sub_known:
                        raise ConfigError(f"{key}.{k}", "unknown field")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("<root>", f"not valid YAML ({exc})") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_yaml(fh.read())

    def override(self, **scalars) -> "ExperimentConfig":
        """Copy with top-level scalars replaced (None values are ignored)."""
        data = self.to_dict()
        for k, v in scalars.items():
            if v is not None:
                data[k] = v
        return ExperimentConfig.from_dict(data)

    # ------------------------------------------------------------ validation

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(EXPERIMENT_KINDS)}")
        p = _real("p", self.p)
        if not P_LOWER < p < P_UPPER:
            raise ConfigError("p", "must lie in (7/3, 5)")
        if self.nonlinearity is not None:
            if not isinstance(self.nonlinearity, dict):
                raise ConfigError("nonlinearity", "expected a mapping")
            try:
                nl = Nonlinearity.from_config(self.nonlinearity)
            except (NonlinearityError, KeyError, TypeError, ValueError, SyntaxError) as exc:
                raise ConfigError("nonlinearity", str(exc)) from exc
            if not math.isclose(nl.p, p):
                raise ConfigError("nonlinearity", f"dominant power {nl.p} differs from p={p}")
        s = self.solver
        _in("solver.c_ceiling", s.c_ceiling, 0.0, 10.0, lo_open=True)
        _in("solver.tol", s.tol, 0.0, 1e-4, lo_open=True)
        _in("solver.tol3d", s.tol3d, 0.0, 1e-2, lo_open=True)
        _in("solver.newton_tol", s.newton_tol, 0.0, 1e-4, lo_open=True)
        _int("solver.max_iter", s.max_iter, 1, 10 ** 6)
        _int("solver.max_iter3d", s.max_iter3d, 1, 10 ** 6)
        _in("c", self.c, 0.0, s.c_ceiling, lo_open=True)
        if not isinstance(self.c_schedule, list) or not self.c_schedule:
            raise ConfigError("c_schedule", "must be a non-empty list")
        for i, c in enumerate(self.c_schedule):
            _in(f"c_schedule[{i}]", c, 0.0, s.c_ceiling, lo_open=True)
        if any(b >= a for a, b in zip(self.c_schedule, self.c_schedule[1:])):
            raise ConfigError("c_schedule", "must be strictly decreasing")
        if self.omega is not None and _real("omega", self.omega) <= 0:
            raise ConfigError("omega", "must be positive")
        _in("radial.rmax_scaled", self.radial.rmax_scaled, 8.0, 200.0)
        _int("radial.n", self.radial.n, 64, 65536)
        _in("grid3d.L_scaled", self.grid3d.L_scaled, 4.0, 40.0)
        n3 = _int("grid3d.n", self.grid3d.n, 16, 96)
        if n3 & (n3 - 1):
            raise ConfigError("grid3d.n", "must be a power of two")
        for name in ("q", "l"):
            v = getattr(self.assumptions, name)
            if v is not None:
                _in(f"assumptions.{name}", v, 10.0 / 3.0, 6.0, lo_open=True, hi_open=True)
        _in("perturbation", self.perturbation, 0.0, 1.0, hi_open=True)
        if not isinstance(self.warm_start, bool):
            raise ConfigError("warm_start", "must be true or false")
        if not isinstance(self.output, str) or not self.output:
            raise ConfigError("output", "must be a non-empty path")
        _int("seed", self.seed, 0, 2 ** 63 - 1)
        _int("threads", self.threads, 1, 1024)


def _real(path, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    return float(v)


def _int(path, v, lo, hi) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if not lo <= v <= hi:
        raise ConfigError(path, f"must lie in [{lo}, {hi}]")
    return v


def _in(path, v, lo, hi, lo_open=False, hi_open=False) -> float:
    x = _real(path, v)
    ok_lo = x > lo if lo_open else x >= lo
    ok_hi = x < hi if hi_open else x <= hi
    if not (ok_lo and ok_hi):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ConfigError(path, f"{x!r} outside {lb}{lo:g}, {hi:g}{rb}")
    return x
