"""Run configuration: nested dataclasses loaded from YAML or JSON.

Lengths are in Å; a string with a unit suffix (``"10 nm"``, ``"750 Å"``,
``"0.1 um"``) is converted on load.  Angles are in degrees.  Unknown keys
are rejected, and every section is validated by building the domain object
it describes.
"""
from __future__ import annotations

import dataclasses
import json
import math
import re
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .beamscan import BeamModel
from .errors import ConfigError, QReflError
from .fitting import LOSS_SPACES, PARAMETERS
from .potential import CasimirVdWPotential, SurfaceMaterial, c4_from_material
from .roughness import RoughnessModel
from .solver import SolverSettings
from .units import ParticleSpecies, UM, NM, UnitContext, polarizability_volume

_LENGTH_UNITS = {"a": 1.0, "å": 1.0, "angstrom": 1.0, "nm": NM, "um": UM, "µm": UM, "μm": UM}
_LENGTH = re.compile(r"^\s*([-+0-9.eE]+)\s*([^\s\d]*)\s*$")


def parse_length(value) -> float:
    """Number in Å, or a string like '10 nm'."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid length {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _LENGTH.match(value)
        if m:
            unit = m.group(2).lower() or "a"
            if unit in _LENGTH_UNITS:
                try:
                    return float(m.group(1)) * _LENGTH_UNITS[unit]
                except ValueError:
                    pass
    raise ConfigError(f"invalid length {value!r}; use a number in Å or e.g. '10 nm'")


def _length(default):
    return field(default=default, metadata={"length": True})


@dataclass
class SpeciesConfig:
    name: str = "3He"
    mass: float = 3.0160293  # u
    polarizability_volume: float = polarizability_volume(2.3e-41)  # Å³

    def build(self) -> ParticleSpecies:
        return ParticleSpecies(self.mass, self.polarizability_volume, self.name)


@dataclass
class MaterialConfig:
    epsilon: float = 4.5
    phi: float = 0.762
    well_depth_V0: float = 9.6  # meV
    well_minimum_a: float = _length(2.65)

    def build(self) -> SurfaceMaterial:
        return SurfaceMaterial(self.epsilon, self.phi, self.well_depth_V0, self.well_minimum_a)


@dataclass
class PotentialConfig:
    c4: float | None = 23600.0  # meV·Å⁴; null derives it from species and material
    l: float = _length(100.0)


@dataclass
class BeamConfig:
    E0: float = 0.63  # meV
    wavelength_spread_rel: float = 0.20
    delta_theta_deg: float = 0.17


@dataclass
class RoughnessConfig:
    enabled: bool = True
    sigma: float = _length(10.0)
    sigma_uncertainty: float = _length(2.0)
    L: float = _length(750.0)


@dataclass
class ScanConfig:
    theta_min_deg: float = 84.0
    theta_max_deg: float = 89.73
    theta_steps: int = 100
    nodes: int = 7


@dataclass
class SolverConfig:
    tolerance: float = 1e-10
    badness_max: float = 1e-3
    v_ratio_max: float = 1e-8
    max_steps: int = 50_000_000
    boundary_order: int = 2

    def build(self) -> SolverSettings:
        return SolverSettings(self.tolerance, self.badness_max, self.v_ratio_max, self.max_steps, self.boundary_order)


def _default_bounds():
    return {"l": [30.0, 300.0], "sigma": [2.0, 30.0], "c4": [5000.0, 60000.0]}


@dataclass
class FitConfig:
    free: list = field(default_factory=lambda: ["l"])
    bounds: dict = field(default_factory=_default_bounds)
    loss_space: str = "loglog_R"
    data_is_rough: bool = False
    n_starts: int = 3


@dataclass
class AsymptoteConfig:
    n: int = 3
    margin: float = 3.0


@dataclass
class RunConfig:
    species: SpeciesConfig = field(default_factory=SpeciesConfig)
    material: MaterialConfig = field(default_factory=MaterialConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    beam: BeamConfig = field(default_factory=BeamConfig)
    roughness: RoughnessConfig = field(default_factory=RoughnessConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    asymptote: AsymptoteConfig = field(default_factory=AsymptoteConfig)

    # domain objects
    def ctx(self) -> UnitContext:
        return UnitContext(self.species.build())

    def material_model(self) -> SurfaceMaterial:
        return self.material.build()

    def c4(self) -> float:
        if self.potential.c4 is None:
            return c4_from_material(self.species.build(), self.material.build())
        return self.potential.c4

    def potential_model(self) -> CasimirVdWPotential:
        return CasimirVdWPotential(self.c4(), self.potential.l)

    def beam_model(self) -> BeamModel:
        b = self.beam
        return BeamModel(b.E0, b.wavelength_spread_rel, math.radians(b.delta_theta_deg), self.species.build())

    def roughness_model(self) -> RoughnessModel | None:
        r = self.roughness
        if not r.enabled:
            return None
        return RoughnessModel(r.sigma, r.L, r.sigma_uncertainty)

    def solver_settings(self) -> SolverSettings:
        return self.solver.build()

    def theta_grid_deg(self):
        import numpy as np

        s = self.scan
        return np.linspace(s.theta_min_deg, s.theta_max_deg, s.theta_steps)

    def validate(self) -> "RunConfig":
        try:
            self.ctx()
            self.material_model()
            self.potential_model()
            self.beam_model()
            self.roughness_model()
            SolverSettings(**dataclasses.asdict(self.solver))
        except QReflError as exc:
            raise ConfigError(str(exc)) from exc
        s = self.scan
        if not 0 <= s.theta_min_deg <= s.theta_max_deg < 90:
            raise ConfigError("scan angles must satisfy 0 <= theta_min <= theta_max < 90")
        if s.theta_steps < 0 or s.nodes < 1:
            raise ConfigError("theta_steps must be >= 0 and nodes >= 1")
        if not 0 < self.solver.tolerance <= 1e-3:
            raise ConfigError("solver tolerance must lie in (0, 1e-3]")
        if self.solver.boundary_order not in (1, 2):
            raise ConfigError("boundary_order must be 1 or 2")
        f = self.fit
        for name in f.free:
            if name not in PARAMETERS:
                raise ConfigError(f"unknown fit parameter {name!r}")
            if name not in f.bounds:
                raise ConfigError(f"no bounds given for fit parameter {name!r}")
        for name, b in f.bounds.items():
            if name not in PARAMETERS:
                raise ConfigError(f"unknown fit parameter {name!r} in bounds")
            if len(b) != 2 or not 0 < b[0] < b[1] or not all(math.isfinite(v) for v in b):
                raise ConfigError(f"bounds for {name} must be [lo, hi] with 0 < lo < hi")
        if f.loss_space not in LOSS_SPACES:
            raise ConfigError(f"loss_space must be one of {LOSS_SPACES}")
        if f.n_starts < 3:
            raise ConfigError("n_starts must be at least 3")
        if self.asymptote.n not in (3, 4):
            raise ConfigError("asymptote.n must be 3 or 4")
        if self.asymptote.margin < 1:
            raise ConfigError("asymptote.margin must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(tp, value, where):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and str(origin) == "<class 'types.UnionType'>"):
        if value is None and type(None) in args:
            return None
        tp = next(a for a in args if a is not type(None))
        return _coerce(tp, value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if tp is list:
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return list(value)
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {value!r}")
        return {k: [float(x) for x in v] for k, v in value.items()}
    return value


def _from_dict(cls, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    kw = {}
    for name, value in data.items():
        f = known[name]
        tp = hints[name]
        sub = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(tp):
            kw[name] = _from_dict(tp, value, sub)
        elif f.metadata.get("length"):
            kw[name] = parse_length(value)
        else:
            try:
                kw[name] = _coerce(tp, value, sub)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{sub}: {exc}") from exc
    return cls(**kw)


def config_from_dict(data: dict) -> RunConfig:
    return _from_dict(RunConfig, data, "").validate()


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if p.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data or {})


def dump_config(cfg: RunConfig, fmt: str = "yaml") -> str:
    d = cfg.to_dict()
    if fmt == "json":
        return json.dumps(d, sort_keys=True, indent=2)
    return yaml.safe_dump(d, sort_keys=True)
