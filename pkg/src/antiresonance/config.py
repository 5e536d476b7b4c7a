"""Run configuration (JSON, ``"schema": 1``) and its translation into models.

All rates are in units of kappa and all lengths in units of lambda_e.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import (AliasChoices, BaseModel, ConfigDict, Field, ValidationError,
                      model_validator)

from .errors import ConfigError
from .geometry import EmitterArray, build_coupling_matrices, make_chain, make_grid
from .modes import (CouplingVector, TemMode, coupling_vector_eigenmode, coupling_vector_pattern,
                    coupling_vector_tem)
from .steady_state import CavityParams, SystemModel


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Geometry(_Block):
    type: Literal["chain", "grid", "explicit"]
    n: Optional[int] = Field(None, ge=1)
    rows: Optional[int] = Field(None, ge=1)
    cols: Optional[int] = Field(None, ge=1)
    d: Optional[float] = Field(None, gt=0)
    axis: list[float] = [1.0, 0.0, 0.0]
    positions: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def _required(self):
        need = {"chain": ("n", "d"), "grid": ("rows", "cols", "d"), "explicit": ("positions",)}
        missing = [k for k in need[self.type] if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.type} geometry needs {', '.join(missing)}")
        return self


class Rates(_Block):
    gamma: float = Field(gt=0)
    g: float = Field(ge=0, validation_alias=AliasChoices("g", "g_ref"))


class TemSpec(_Block):
    m: int = Field(ge=0, le=64)
    n: int = Field(0, ge=0, le=64)
    w: float = Field(gt=0)
    offset: tuple[float, float] = (0.0, 0.0)


class Coupling(_Block):
    pattern: Optional[Literal["uniform", "alternating", "custom"]] = None
    values: Optional[list[float]] = None
    tem: Optional[TemSpec] = None
    eigenmode: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        sources = [self.pattern is not None, self.tem is not None, self.eigenmode]
        if sum(sources) != 1:
            raise ValueError("exactly one coupling source required: pattern, tem or eigenmode")
        if self.pattern == "custom" and self.values is None:
            raise ValueError("custom pattern needs values")
        return self


class Cavity(_Block):
    kappa: float = Field(1.0, gt=0)
    delta_c: Optional[float] = None
    auto_tune: Optional[tuple[float, float]] = None
    eta: float = Field(1.0, ge=0)

    @model_validator(mode="after")
    def _one_tuning(self):
        if (self.delta_c is None) == (self.auto_tune is None):
            raise ValueError("exactly one of delta_c / auto_tune required")
        return self


class Scan(_Block):
    min: float
    max: float
    points: int = Field(ge=2)
    mode: Optional[Literal["sweep_both", "sweep_laser"]] = None

    @model_validator(mode="after")
    def _order(self):
        if not self.max > self.min:
            raise ValueError("scan max must exceed min")
        return self

    def grid(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.points)


class OracleBlock(_Block):
    n_max: int = Field(3, ge=1, le=8)
    etas: list[float] = [1e-3]
    method: Literal["null_space", "time_integration"] = "null_space"
    scan: Optional[Scan] = None


class Sweep(_Block):
    kind: Literal["spacing", "tem_order", "tem_search"]
    values: list[float] = []
    w: Optional[float] = Field(None, gt=0)
    max_order: int = Field(4, ge=0, le=64)
    offsets: list[float] = [-0.1, -0.05, 0.0, 0.05, 0.1]


class Output(_Block):
    dir: str = "out"
    prefix: Optional[str] = None


class RunConfig(_Block):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = Field(alias="schema")
    name: str = "run"
    task: Literal["spectrum", "tune", "cooperativity", "oracle"] = "spectrum"
    geometry: Geometry
    dipole_orientation: list[float] = [0.0, 1.0, 0.0]
    g_variant: Literal["standard", "as_printed"] = "standard"
    zero_dipole_shifts: bool = False
    rates: Rates
    coupling: Coupling
    cavity: Cavity
    scan: Optional[Scan] = None
    oracle: Optional[OracleBlock] = None
    sweep: Optional[Sweep] = None
    output: Output = Output()

    @model_validator(mode="after")
    def _task_blocks(self):
        if self.task in ("spectrum", "oracle") and self.scan is None and \
                (self.oracle is None or self.oracle.scan is None):
            raise ValueError(f"task {self.task!r} needs a scan block")
        if self.task == "oracle" and self.oracle is None:
            raise ValueError("task 'oracle' needs an oracle block")
        if self.task == "cooperativity" and self.sweep is None:
            raise ValueError("task 'cooperativity' needs a sweep block")
        return self

    @property
    def prefix(self) -> str:
        return self.output.prefix or self.name

    @property
    def active_scan(self) -> Optional[Scan]:
        if self.task == "oracle" and self.oracle is not None and self.oracle.scan is not None:
            return self.oracle.scan
        return self.scan


def _line_of(text: str, loc: tuple) -> int | None:
    keys = [k for k in loc if isinstance(k, str)]
    for key in reversed(keys):
        needle = f'"{key}"'
        for lineno, line in enumerate(text.splitlines(), 1):
            if needle in line:
                return lineno
    return None


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            where = ".".join(str(p) for p in err["loc"]) or "<root>"
            line = _line_of(text, err["loc"])
            prefix = f"line {line}: " if line else ""
            msgs.append(f"{prefix}{where}: {err['msg']}")
        raise ConfigError("; ".join(msgs)) from exc


def load_config(path: str | Path) -> tuple[RunConfig, str]:
    """Parsed config plus the sha256 of the raw file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text), hashlib.sha256(text.encode()).hexdigest()


def build_array(cfg: RunConfig, d: float | None = None) -> EmitterArray:
    geo = cfg.geometry
    mu = np.asarray(cfg.dipole_orientation, float)
    mu = mu / np.linalg.norm(mu)
    spacing = geo.d if d is None else d
    if geo.type == "chain":
        return make_chain(geo.n, spacing, geo.axis, dipole_orientation=mu, gamma=cfg.rates.gamma)
    if geo.type == "grid":
        return make_grid(geo.rows, geo.cols, spacing, dipole_orientation=mu, gamma=cfg.rates.gamma)
    return EmitterArray(np.asarray(geo.positions, float), mu, cfg.rates.gamma)


def build_coupling(cfg: RunConfig, array: EmitterArray, mats) -> CouplingVector:
    c = cfg.coupling
    if c.tem is not None:
        return coupling_vector_tem(array, TemMode(c.tem.m, c.tem.n, c.tem.w, c.tem.offset), cfg.rates.g)
    if c.eigenmode:
        return coupling_vector_eigenmode(mats, cfg.rates.g)
    return coupling_vector_pattern(array.n, cfg.rates.g, c.pattern, c.values)


def build_model(cfg: RunConfig, d: float | None = None) -> SystemModel:
    array = build_array(cfg, d)
    mats = build_coupling_matrices(array, cfg.g_variant)
    gv = build_coupling(cfg, array, mats)
    if cfg.zero_dipole_shifts:
        mats = mats.without_coherent()
    cav = cfg.cavity
    return SystemModel(CavityParams(cav.kappa, cav.delta_c or 0.0, cav.eta), mats, gv)
