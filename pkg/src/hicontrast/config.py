"""Run configuration: nested YAML sections parsed into frozen dataclasses.

Every tolerance used by the numerical modules has a field here, so a report
that embeds the resolved configuration records every knob of the run.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from hicontrast.beta import GAP_TOL, POLE_GUARD, TAIL_TOL
from hicontrast.defect import KAPPA_RMAX, LAMBDA_TOL, N_GRID
from hicontrast.epsilon import CELLS_PER_INCLUSION
from hicontrast.errors import ConfigError
from hicontrast.geometry import (
    Ball,
    BoundaryInclusionPolicy,
    CellGeometry,
    DefectBall,
    DefectSpec,
    Polygon,
)
from hicontrast.inclusion import DEGENERACY_TOL, K_MAX, MEAN_TOL


@dataclass(frozen=True)
class InclusionConfig:
    shape: str = "ball"
    center: tuple | None = None
    radius: float | None = 0.3
    vertices: tuple | None = None


@dataclass(frozen=True)
class GeometryConfig:
    dimension: int = 2
    inclusion: InclusionConfig = field(default_factory=InclusionConfig)
    a0: float = 1.0
    a1: float = 1.0
    mesh_h: float | None = None  # cell mesh size; None picks a default per dimension


@dataclass(frozen=True)
class DefectConfig:
    shape: str = "ball"
    radius: float | None = 0.5
    vertices: tuple | None = None
    a2: float = 1.0


@dataclass(frozen=True)
class SyntheticConfig:
    eigenvalues: tuple = ()
    squared_means: tuple = ()


@dataclass(frozen=True)
class BetaConfig:
    method: str = "explicit"  # series | direct | explicit
    spectrum: str = "ball"  # ball | fem | synthetic (series method only)
    k_max: int = K_MAX
    pole_guard: float = POLE_GUARD
    tail_tol: float = TAIL_TOL
    mean_tol: float = MEAN_TOL
    degeneracy_tol: float = DEGENERACY_TOL
    radial_elements: int = 400
    inclusion_h: float | None = None
    lambda_min: float = 0.0
    lambda_max: float | None = None
    samples: int = 200
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)


@dataclass(frozen=True)
class GapsConfig:
    lambda_max: float | None = None
    gap_tol: float = GAP_TOL
    samples: int = 64


@dataclass(frozen=True)
class HomogenizeConfig:
    a_hom: float | None = None  # skip the cell problem and use this scalar
    levels: int = 1  # meshes h, h/2, ... for Richardson extrapolation


@dataclass(frozen=True)
class ModesConfig:
    m_list: object = "auto 0..3"
    gap_index: int | None = None  # None: every gap below gaps.lambda_max
    method: str = "radial"  # radial | fem
    n_grid: int = N_GRID
    tol: float = LAMBDA_TOL
    kappa_rmax: float = KAPPA_RMAX
    fem_h: float | None = None
    k_window: int = 4
    n_scan: int = 40


@dataclass(frozen=True)
class PolicyConfig:
    mode: str = "power_law"
    constant: float = 1.0
    theta: float | None = 1.0


@dataclass(frozen=True)
class ValidationConfig:
    eps_list: tuple = (0.125, 0.0625, 0.03125)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    R_max: float | None = None
    cells_per_inclusion: int = CELLS_PER_INCLUSION
    window: float | None = None
    window_fraction: float = 0.5
    k_max_eigs: int = 6
    mode_index: int = 0  # position among the radial modes found (ascending eigenvalue)
    mode_m: float | None = None  # if set, the lowest mode of this angular order instead
    reference: str = "discrete"
    subordination_eps: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs"
    formats: tuple = ("json", "csv")


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    defect: DefectConfig = field(default_factory=DefectConfig)
    beta: BetaConfig = field(default_factory=BetaConfig)
    gaps: GapsConfig = field(default_factory=GapsConfig)
    homogenize: HomogenizeConfig = field(default_factory=HomogenizeConfig)
    modes: ModesConfig = field(default_factory=ModesConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # --- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def content_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    # --- domain objects ----------------------------------------------------

    def cell_geometry(self) -> CellGeometry:
        g = self.geometry
        inc = g.inclusion
        if inc.shape == "ball":
            if inc.radius is None:
                raise ConfigError("geometry.inclusion.radius", "required for a ball")
            center = tuple(inc.center) if inc.center is not None else (0.5,) * g.dimension
            shape = Ball(center, float(inc.radius))
        elif inc.shape == "polygon":
            if not inc.vertices:
                raise ConfigError("geometry.inclusion.vertices", "required for a polygon")
            shape = Polygon(tuple(tuple(map(float, v)) for v in inc.vertices))
        else:
            raise ConfigError("geometry.inclusion.shape", f"unknown shape {inc.shape!r}")
        return CellGeometry(g.dimension, shape, g.a0, g.a1)

    def defect_spec(self) -> DefectSpec:
        d = self.defect
        if d.shape == "ball":
            if d.radius is None:
                raise ConfigError("defect.radius", "required for a ball")
            return DefectSpec(DefectBall(float(d.radius)), d.a2)
        if d.shape == "polygon":
            if self.geometry.dimension != 2:
                raise ConfigError("defect.shape", "polygonal defects are 2D only")
            if not d.vertices:
                raise ConfigError("defect.vertices", "required for a polygon")
            return DefectSpec(Polygon(tuple(tuple(map(float, v)) for v in d.vertices)), d.a2)
        raise ConfigError("defect.shape", f"unknown shape {d.shape!r}")

    def policy(self) -> BoundaryInclusionPolicy:
        p = self.validation.policy
        try:
            return BoundaryInclusionPolicy(p.mode, p.constant, p.theta if p.mode == "power_law" else None)
        except ValueError as exc:
            raise ConfigError("validation.policy.mode", str(exc)) from exc

    def m_values(self) -> list:
        return parse_m_list(self.modes.m_list, self.geometry.dimension)

    def validate(self) -> "RunConfig":
        """Check invariants that do not depend on the subcommand."""
        self.cell_geometry()
        self.defect_spec()
        b = self.beta
        if b.method not in ("series", "direct", "explicit"):
            raise ConfigError("beta.method", f"unknown method {b.method!r}")
        if b.spectrum not in ("ball", "fem", "synthetic"):
            raise ConfigError("beta.spectrum", f"unknown spectrum source {b.spectrum!r}")
        if b.spectrum == "synthetic":
            s = b.synthetic
            if len(s.eigenvalues) != len(s.squared_means) or not s.eigenvalues:
                raise ConfigError("beta.synthetic", "need matching nonempty eigenvalues and squared_means")
        for path, value in (("beta.k_max", b.k_max), ("beta.pole_guard", b.pole_guard),
                            ("beta.tail_tol", b.tail_tol), ("gaps.gap_tol", self.gaps.gap_tol),
                            ("modes.tol", self.modes.tol), ("modes.n_grid", self.modes.n_grid),
                            ("modes.kappa_rmax", self.modes.kappa_rmax),
                            ("validation.cells_per_inclusion", self.validation.cells_per_inclusion),
                            ("validation.k_max_eigs", self.validation.k_max_eigs)):
            if not value > 0:
                raise ConfigError(path, "must be positive")
        if self.modes.method not in ("radial", "fem"):
            raise ConfigError("modes.method", f"unknown method {self.modes.method!r}")
        self.m_values()
        self.policy()
        eps = list(self.validation.eps_list)
        if any(not e > 0 for e in eps) or any(b_ >= a for a, b_ in zip(eps, eps[1:])):
            raise ConfigError("validation.eps_list", "must be positive and strictly decreasing")
        if self.validation.reference not in ("discrete", "limit"):
            raise ConfigError("validation.reference", f"unknown reference {self.validation.reference!r}")
        for f in self.output.formats:
            if f not in ("json", "csv"):
                raise ConfigError("output.formats", f"unknown format {f!r}")
        return self


def parse_m_list(spec, n) -> list:
    """``[0, 1, 2]`` or ``"auto 0..M"`` (the first M+1 orders of the dimension)."""
    if isinstance(spec, str):
        s = spec.strip()
        if not s.startswith("auto"):
            raise ConfigError("modes.m_list", f"expected a list or 'auto 0..M', got {spec!r}")
        try:
            top = int(s.split("..")[1])
        except (IndexError, ValueError) as exc:
            raise ConfigError("modes.m_list", f"cannot parse {spec!r}") from exc
        return [l + (0.5 if n == 3 else 0) for l in range(top + 1)]
    try:
        vals = [float(v) for v in spec]
    except TypeError as exc:
        raise ConfigError("modes.m_list", "must be a list of orders") from exc
    from hicontrast.defect import AngularIndex

    for v in vals:
        AngularIndex(n, v)
    return [int(v) if n == 2 else v for v in vals]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, path):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown field")
        default = known[key].default_factory() if callable(known[key].default_factory) else known[key].default
        sub = f"{path}.{key}" if path else key
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, sub)
        elif isinstance(value, list):
            kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[key] = _coerce(value, default, sub)
    return cls(**kwargs)


def _coerce(value, default, path):
    if value is None or default is None or isinstance(default, str) and not isinstance(value, str):
        if isinstance(default, str) and value is not None and not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    return value


def from_dict(data) -> RunConfig:
    return _build(RunConfig, data or {}, "").validate()


def set_path(data: dict, dotted: str, raw: str) -> dict:
    """Apply one ``section.field=value`` override; the value is parsed as YAML."""
    out = copy.deepcopy(data)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, "override path crosses a scalar field")
    node[keys[-1]] = yaml.safe_load(raw)
    return out


def load(path=None, overrides=()) -> RunConfig:
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError("config", f"file not found: {p}")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"cannot parse {p}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", f"expected section.field=value, got {item!r}")
        key, raw = item.split("=", 1)
        data = set_path(data, key.strip(), raw)
    return from_dict(data)


def loads(text) -> RunConfig:
    return from_dict(yaml.safe_load(text) or {})
