# metriclab/experiments/base.py
"""Experiment registry, JSON configuration and the in-memory report."""
import copy
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__
from ..cache import get_or_build
from ..config import Config
from ..domains import (
    DomainSpec,
    boundary_distance,
    contains,
    direction_fan,
    inradius,
    parse_spec,
    sample_interior,
)
from ..errors import ConfigError, DomainSpecError, MetricLabError, NumericalError

logger = logging.getLogger(__name__)

VERDICT_KINDS = ("required", "expected-fail", "conditional")
STRIP_FRACTION = 0.15

_TOP_KEYS = {
    "experiment", "spec", "degree_cap", "grid", "fan", "tolerances",
    "boundary_strip", "output_dir", "solver", "params",
}
_GRID_KEYS = {"count", "seed", "min_norm", "max_norm"}
_FAN_KEYS = {"count", "seed"}
_SOLVER_KEYS = {"degree", "samples"}


# =====================================================
# CONFIGURATION
# =====================================================
@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    spec: str
    degree_cap: int
    grid: dict
    fan: dict
    tolerances: dict
    boundary_strip: float
    output_dir: str
    solver: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def domain(self) -> DomainSpec:
        return parse_spec(self.spec)

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "spec": self.spec,
            "degree_cap": self.degree_cap,
            "grid": dict(self.grid),
            "fan": dict(self.fan),
            "tolerances": dict(self.tolerances),
            "boundary_strip": self.boundary_strip,
            "output_dir": self.output_dir,
            "solver": dict(self.solver),
            "params": copy.deepcopy(self.params),
        }


@dataclass(frozen=True)
class Experiment:
    name: str
    anchor: str
    defaults: dict
    runner: Callable
    summary: str = ""


REGISTRY: dict[str, Experiment] = {}


def experiment(name: str, anchor: str, defaults: dict):
    """Register a runner ``fn(ctx) -> None`` under ``name``."""

    def wrap(fn):
        if name in REGISTRY:
            raise RuntimeError(f"Experiment {name!r} registered twice")
        doc = (fn.__doc__ or "").strip().splitlines()
        REGISTRY[name] = Experiment(name, anchor, defaults, fn, doc[0] if doc else "")
        return fn

    return wrap


def list_experiments() -> list[dict]:
    return [
        {"name": e.name, "anchor": e.anchor, "spec": e.defaults.get("spec"), "summary": e.summary}
        for e in sorted(REGISTRY.values(), key=lambda e: e.name)
    ]


def _check_keys(section: str, data: dict, allowed: set):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"Unknown key(s) in {section}: {', '.join(unknown)}")


def _positive(name: str, value, *, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"{name} must be positive, got {value!r}")


def build_config(data: dict, **overrides) -> ExperimentConfig:
    """Merge ``data`` (then non-None ``overrides``) over the experiment defaults."""
    if not isinstance(data, dict):
        raise ConfigError("Experiment config must be a JSON object")
    data = dict(data)
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    _check_keys("config", data, _TOP_KEYS)

    name = data.get("experiment")
    if name not in REGISTRY:
        raise ConfigError(f"Unknown experiment: {name!r}")
    defaults = REGISTRY[name].defaults

    spec_text = data.get("spec", defaults["spec"])
    try:
        spec = parse_spec(spec_text)
    except DomainSpecError as e:
        raise ConfigError(str(e)) from e

    degree_cap = data.get("degree_cap", defaults.get("degree_cap", Config.DEGREE_CAP))
    _positive("degree_cap", degree_cap, integer=True)
    if degree_cap < 2:
        raise ConfigError(f"degree_cap must be >= 2, got {degree_cap}")

    sections = {}
    for section, allowed in (("grid", _GRID_KEYS), ("fan", _FAN_KEYS), ("solver", _SOLVER_KEYS)):
        given = data.get(section) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"{section} must be an object")
        _check_keys(section, given, allowed)
        merged = {**defaults.get(section, {}), **given}
        sections[section] = merged

    for section in ("grid", "fan"):
        _positive(f"{section}.count", sections[section].get("count", 1), integer=True)
        seed = sections[section].setdefault("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"{section}.seed must be a nonnegative integer, got {seed!r}")
    for bound in ("min_norm", "max_norm"):
        value = sections["grid"].get(bound)
        if value is not None:
            _positive(f"grid.{bound}", value)
    for key, value in sections["solver"].items():
        if value is not None:
            _positive(f"solver.{key}", value, integer=True)

    tolerances = {**defaults.get("tolerances", {}), **(data.get("tolerances") or {})}
    _check_keys("tolerances", tolerances, set(defaults.get("tolerances", {})))
    for key, value in tolerances.items():
        _positive(f"tolerances.{key}", value)

    strip = data.get("boundary_strip")
    if strip is None:
        strip = STRIP_FRACTION * inradius(spec) * spec.scale
    _positive("boundary_strip", strip)

    params = {**copy.deepcopy(defaults.get("params", {})), **(data.get("params") or {})}
    _check_keys("params", params, set(defaults.get("params", {})))

    output_dir = str(data.get("output_dir") or Config.OUTPUT_DIR)

    return ExperimentConfig(
        experiment=name,
        spec=spec.canonical,
        degree_cap=int(degree_cap),
        grid=sections["grid"],
        fan=sections["fan"],
        tolerances=tolerances,
        boundary_strip=float(strip),
        output_dir=output_dir,
        solver=sections["solver"],
        params=params,
    )


def parse_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed JSON in {path}: {e}") from e
    return build_config(data, **overrides)


# =====================================================
# REPORT
# =====================================================
@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    kind: str
    tolerance: float
    observed: float | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "kind": self.kind,
            "tolerance": self.tolerance,
            "observed": self.observed,
            "detail": self.detail,
        }


@dataclass
class Report:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    wall_clock: float | None = None
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def failed(self) -> list[str]:
        return [v.name for v in self.verdicts if not v.passed]

    def as_dict(self) -> dict:
        out = {
            "tool": "metriclab",
            "version": self.version,
            "config": self.config.as_dict(),
            "summary": self.summary,
            "verdicts": [v.as_dict() for v in self.verdicts],
            "diagnostics": self.diagnostics,
            "passed": self.passed,
            "rows": self.rows,
        }
        if self.wall_clock is not None and Config.REPORT_TIMING:
            out["wall_clock_seconds"] = self.wall_clock
        return out


# =====================================================
# RUN CONTEXT
# =====================================================
def _coerce_point(spec: DomainSpec, raw) -> np.ndarray:
    """[x, [re, im], ...] -> complex point."""
    coords = []
    for c in raw if isinstance(raw, (list, tuple)) else [raw]:
        if isinstance(c, (list, tuple)):
            if len(c) != 2:
                raise ConfigError(f"Complex coordinate must be [re, im], got {c!r}")
            coords.append(complex(float(c[0]), float(c[1])))
        else:
            coords.append(complex(float(c)))
    if len(coords) != spec.n:
        raise ConfigError(f"Point {raw!r} has {len(coords)} coordinates, {spec.canonical} needs {spec.n}")
    return np.array(coords, dtype=complex)


def point_columns(z, prefix: str = "z") -> dict:
    out = {}
    for j, c in enumerate(np.atleast_1d(z)):
        out[f"{prefix}{j}_re"] = float(np.real(c))
        out[f"{prefix}{j}_im"] = float(np.imag(c))
    return out


class RunContext:
    """What a runner sees: the config, its domain and lazily built inputs."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.spec = config.domain
        self.tol = config.tolerances
        self.params = config.params
        self.report = Report(config)
        self._series = None

    @property
    def series(self):
        if self._series is None:
            self._series = get_or_build(self.spec, self.config.degree_cap)
        return self._series

    def point(self, raw) -> np.ndarray:
        z = _coerce_point(self.spec, raw)
        if not contains(self.spec, z):
            raise ConfigError(f"Point {raw!r} lies outside {self.spec.canonical}")
        return z

    def points(self) -> list[np.ndarray]:
        grid = self.config.grid
        return sample_interior(
            self.spec,
            int(grid["count"]),
            int(grid["seed"]),
            min_norm=grid.get("min_norm"),
            max_norm=grid.get("max_norm"),
        )

    def strip_points(self) -> list[np.ndarray]:
        grid = self.config.grid
        width = self.config.boundary_strip
        return sample_interior(
            self.spec,
            int(grid["count"]),
            int(grid["seed"]),
            min_norm=grid.get("min_norm"),
            max_norm=grid.get("max_norm"),
            accept=lambda pt: boundary_distance(self.spec, pt) < width,
        )

    def fan(self) -> list[np.ndarray]:
        return direction_fan(self.spec.n, int(self.config.fan["count"]), int(self.config.fan["seed"]))

    def isolated(self, fn: Callable, item, index: int) -> dict:
        """Run one row; a numerical failure marks the row instead of the run."""
        try:
            row = fn(item)
            row.setdefault("error", "")
        except MetricLabError as e:
            logger.warning("Row %s of %s failed: %s", index, self.config.experiment, e)
            row = {"error": f"{type(e).__name__}: {e}"}
        return {"index": index, **row}

    def verdict(
        self,
        name: str,
        passed: bool,
        *,
        tolerance: float,
        observed: float | None = None,
        kind: str = "required",
        detail: str = "",
    ):
        if kind not in VERDICT_KINDS:
            raise ValueError(f"Unknown verdict kind: {kind}")
        self.report.verdicts.append(
            Verdict(name, bool(passed), kind, float(tolerance),
                    None if observed is None else float(observed), detail)
        )


def finite(values) -> list[float]:
    return [v for v in values if v is not None and math.isfinite(v)]


def run_experiment(config: ExperimentConfig) -> Report:
    entry = REGISTRY.get(config.experiment)
    if entry is None:
        raise ConfigError(f"Unknown experiment: {config.experiment!r}")
    ctx = RunContext(config)
    logger.info("Running %s on %s (D=%s)", config.experiment, config.spec, config.degree_cap)
    started = time.perf_counter()
    entry.runner(ctx)
    ctx.report.wall_clock = time.perf_counter() - started
    failed_rows = sum(1 for r in ctx.report.rows if r.get("error"))
    ctx.report.diagnostics.setdefault("failed_rows", failed_rows)
    if failed_rows:
        ctx.report.verdicts.append(
            Verdict("rows-evaluated", False, "required", 0.0, float(failed_rows),
                    f"{failed_rows} row(s) raised a numerical error")
        )
    logger.info(
        "Finished %s in %.2fs: %s",
        config.experiment, ctx.report.wall_clock, "pass" if ctx.report.passed else "FAIL",
    )
    if not ctx.report.rows and not ctx.report.verdicts:
        raise NumericalError(f"Experiment {config.experiment} produced no output")
    return ctx.report
