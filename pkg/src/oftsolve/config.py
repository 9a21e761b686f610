"""Solver configuration files.

INI-style text read with :mod:`configparser`::

    [grid]
    dim = 2
    lower = -1, -1
    upper = 1, 1
    n = 70, 70

    [solver]
    kappa = 10
    dt0 = 0.05
    dtT_ratio = 10          ; optional, default 10
    t_final = 20            ; optional, default kappa * longest edge
    n_steps = 102           ; optional, overrides the schedule length
    stop = fixed_schedule   ; or ub_threshold / residual_threshold
    tol = 0.01              ; required for threshold rules

    [refraction]
    kind = gaussian         ; uniform | gaussian | luneburg | raster
    amplitude = 0.1
    center = 0, 0
    width = 0.5

    [incident]
    kind = plane            ; plane | image_pair
    direction = 1, 0

    [output]
    path = field.oftf
    format = oftf           ; oftf | csv
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .grid import Grid, RefractionField
from .helmholtz import IncidentField
from .paraxial import StopKind, StoppingRule
from .quadrature import composite_weights
from .schedule import build_schedule

__all__ = ["ConfigError", "SolverConfig", "parse_config", "load_config", "refraction_from_section"]


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(key, f"expected numbers, got {text!r}") from None


def _ints(text: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(key, f"expected integers, got {text!r}") from None


def _fmt(vals) -> str:
    return ", ".join(repr(v) for v in vals)


@dataclass
class SolverConfig:
    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    n: tuple[int, ...]
    kappa: float
    dt0: float
    dtT_ratio: float = 10.0
    t_final: float | None = None
    n_steps: int | None = None
    stop: str = "fixed_schedule"
    tol: float = 0.0
    refraction: dict = field(default_factory=lambda: {"kind": "uniform", "beta0": "1"})
    incident: dict = field(default_factory=lambda: {"kind": "plane"})
    output_path: str = "field.oftf"
    output_format: str = "oftf"

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError("grid.dim", "must be 1, 2 or 3")
        for key in ("lower", "upper", "n"):
            if len(getattr(self, key)) != self.dim:
                raise ConfigError(f"grid.{key}", f"needs {self.dim} entries")
        for d in range(self.dim):
            if not self.upper[d] > self.lower[d]:
                raise ConfigError("grid.upper", f"axis {d + 1} upper bound must exceed lower bound")
            if self.n[d] < 3:
                raise ConfigError("grid.n", "every axis needs at least 3 points")
        for key in ("kappa", "dt0"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"solver.{key}", "must be positive")
        if not self.dtT_ratio > 1:
            raise ConfigError("solver.dtT_ratio", "must exceed 1")
        if self.t_final is not None and not self.t_final > self.dt0 * self.dtT_ratio:
            raise ConfigError("solver.t_final", "must exceed the final step dt0 * dtT_ratio")
        if self.n_steps is not None and self.n_steps < 1:
            raise ConfigError("solver.n_steps", "must be at least 1")
        try:
            kind = StopKind(self.stop)
        except ValueError:
            raise ConfigError("solver.stop", f"unknown stopping rule {self.stop!r}") from None
        if kind is not StopKind.FIXED and not self.tol > 0:
            raise ConfigError("solver.tol", "threshold stopping rules need tol > 0")
        if self.output_format not in ("oftf", "csv"):
            raise ConfigError("output.format", "must be oftf or csv")
        rk = self.refraction.get("kind")
        if rk not in ("uniform", "gaussian", "luneburg", "raster"):
            raise ConfigError("refraction.kind", f"unknown kind {rk!r}")
        ik = self.incident.get("kind")
        if ik not in ("plane", "image_pair"):
            raise ConfigError("incident.kind", f"unknown kind {ik!r}")
        if ik == "image_pair" and self.dim != 3:
            raise ConfigError("incident.kind", "image_pair needs dim = 3")
        direction = self._direction()
        if len(direction) != self.dim or not np.linalg.norm(direction) > 0:
            raise ConfigError("incident.direction", f"needs {self.dim} entries, not all zero")
        if rk == "raster" and self.dim != 2:
            raise ConfigError("refraction.kind", "raster maps need dim = 2")
        if rk == "raster" and "path" not in self.refraction:
            raise ConfigError("refraction.path", "required for raster refraction")

    def _direction(self) -> tuple[float, ...]:
        text = self.incident.get("direction") or self.incident.get("k_vector")
        if text is None:
            return (1.0,) + (0.0,) * (self.dim - 1)
        return _floats(text, "incident.direction")

    # -- derived objects -----------------------------------------------------
    @property
    def grid(self) -> Grid:
        return Grid(self.lower, self.upper, self.n)

    @property
    def T(self) -> float:
        return self.t_final if self.t_final is not None else self.kappa * max(self.grid.lengths)

    def schedule(self):
        return build_schedule(self.dt0, self.dt0 * self.dtT_ratio, self.T, n_steps=self.n_steps)

    def weights(self, sched=None):
        return composite_weights(sched or self.schedule())

    def stopping_rule(self) -> StoppingRule:
        kind = StopKind(self.stop)
        return StoppingRule(kind, self.tol) if kind is not StopKind.FIXED else StoppingRule.fixed()

    def incident_field(self) -> IncidentField:
        d = self._direction()
        if self.incident["kind"] == "plane":
            return IncidentField.plane(self.kappa, d)
        return IncidentField.image_pair(self.kappa, d)

    def refraction_field(self, base_dir: Path | None = None) -> RefractionField:
        return refraction_from_section(self.refraction, self.grid, base_dir)

    # -- serialization -------------------------------------------------------
    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["grid"] = {"dim": str(self.dim), "lower": _fmt(self.lower), "upper": _fmt(self.upper), "n": _fmt(self.n)}
        solver = {"kappa": repr(self.kappa), "dt0": repr(self.dt0), "dtT_ratio": repr(self.dtT_ratio), "stop": self.stop}
        if self.t_final is not None:
            solver["t_final"] = repr(self.t_final)
        if self.n_steps is not None:
            solver["n_steps"] = str(self.n_steps)
        if self.tol:
            solver["tol"] = repr(self.tol)
        cp["solver"] = solver
        cp["refraction"] = dict(self.refraction)
        cp["incident"] = dict(self.incident)
        cp["output"] = {"path": self.output_path, "format": self.output_format}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)

    def __eq__(self, other):
        if not isinstance(other, SolverConfig):
            return NotImplemented
        return all(getattr(self, f.name) == getattr(other, f.name) for f in fields(self))


def _get(cp, section, key, conv, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"{section}.{key}", "missing")
        return default
    text = cp.get(section, key).strip()
    if text == "":
        if required:
            raise ConfigError(f"{section}.{key}", "empty")
        return default
    try:
        return conv(text)
    except (ValueError, TypeError):
        raise ConfigError(f"{section}.{key}", f"cannot parse {text!r}") from None


def parse_config(text: str) -> SolverConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    for sec in ("grid", "solver"):
        if not cp.has_section(sec):
            raise ConfigError(sec, "section missing")
    dim = _get(cp, "grid", "dim", int, required=True)
    lower = _floats(_get(cp, "grid", "lower", str, required=True), "grid.lower")
    upper = _floats(_get(cp, "grid", "upper", str, required=True), "grid.upper")
    n = _ints(_get(cp, "grid", "n", str, required=True), "grid.n")
    return SolverConfig(
        dim=dim,
        lower=lower,
        upper=upper,
        n=n,
        kappa=_get(cp, "solver", "kappa", float, required=True),
        dt0=_get(cp, "solver", "dt0", float, required=True),
        dtT_ratio=_get(cp, "solver", "dtT_ratio", float, 10.0),
        t_final=_get(cp, "solver", "t_final", float),
        n_steps=_get(cp, "solver", "n_steps", int),
        stop=_get(cp, "solver", "stop", str, "fixed_schedule"),
        tol=_get(cp, "solver", "tol", float, 0.0),
        refraction=dict(cp["refraction"]) if cp.has_section("refraction") else {"kind": "uniform", "beta0": "1"},
        incident=dict(cp["incident"]) if cp.has_section("incident") else {"kind": "plane"},
        output_path=_get(cp, "output", "path", str, "field.oftf") if cp.has_section("output") else "field.oftf",
        output_format=_get(cp, "output", "format", str, "oftf") if cp.has_section("output") else "oftf",
    )


def load_config(path) -> SolverConfig:
    return parse_config(Path(path).read_text())


def refraction_from_section(section: dict, grid: Grid, base_dir: Path | None = None) -> RefractionField:
    """Build beta from a ``[refraction]`` section."""
    kind = section.get("kind", "uniform")
    dim = grid.dim

    def vec(key, default):
        return _floats(section[key], f"refraction.{key}") if key in section else default

    def num(key, default=None):
        if key not in section:
            if default is None:
                raise ConfigError(f"refraction.{key}", "missing")
            return default
        try:
            return float(section[key])
        except ValueError:
            raise ConfigError(f"refraction.{key}", f"cannot parse {section[key]!r}") from None

    if kind == "uniform":
        beta0 = num("beta0", 1.0)
        if not beta0 > 0:
            raise ConfigError("refraction.beta0", "must be positive")
        return RefractionField.uniform(grid, beta0)
    if kind in ("gaussian", "luneburg"):
        center = vec("center", (0.0,) * dim)
        if len(center) != dim:
            raise ConfigError("refraction.center", f"needs {dim} entries")
        r2 = lambda *x: sum((xi - c) ** 2 for xi, c in zip(x, center))  # noqa: E731
        if kind == "gaussian":
            amp = num("amplitude")
            width = num("width")
            if not width > 0:
                raise ConfigError("refraction.width", "must be positive")
            return RefractionField.from_function(grid, lambda *x: 1.0 + amp * np.exp(-r2(*x) / width**2))
        radius = num("radius", 1.0)
        if not radius > 0:
            raise ConfigError("refraction.radius", "must be positive")
        return RefractionField.from_function(
            grid, lambda *x: np.where(r2(*x) <= radius**2, 2.0 - r2(*x) / radius**2, 1.0)
        )
    if kind == "raster":
        from .io import load_raster_refraction

        path = Path(section["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_raster_refraction(path, num("amplitude"), grid)
    raise ConfigError("refraction.kind", f"unknown kind {kind!r}")
