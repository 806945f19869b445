"""Periodicity cell, inclusion, defect and the epsilon-dependent phase map.

Space is split into four phases: full inclusion copies lying outside the
defect, the connected matrix, the defect itself, and the parts (outside the
defect) of inclusion copies cut by the defect boundary.  Points on an
interface resolve to the matrix or the defect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from hicontrast.errors import GeometryError


class PhaseLabel(IntEnum):
    INCLUSION = 0
    MATRIX = 1
    DEFECT = 2
    BOUNDARY_INCLUSION = 3


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def contains(self, y):
        """Open-ball membership for an (N, d) array of cell-local points."""
        c = np.asarray(self.center, float)
        return np.linalg.norm(np.asarray(y) - c, axis=-1) < self.radius

    def volume(self) -> float:
        n = len(self.center)
        if n == 2:
            return float(np.pi * self.radius**2)
        return float(4.0 / 3.0 * np.pi * self.radius**3)

    def boundary_samples(self, count=256):
        c = np.asarray(self.center, float)
        if len(c) == 2:
            t = np.linspace(0, 2 * np.pi, count, endpoint=False)
            return c + self.radius * np.column_stack([np.cos(t), np.sin(t)])
        g = np.random.default_rng(0).normal(size=(count, 3))
        return c + self.radius * g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon in 2D given by its vertices (counter-clockwise)."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(tuple(map(float, v)) for v in self.vertices))

    @property
    def array(self):
        return np.asarray(self.vertices, float)

    def contains(self, y):
        y = np.atleast_2d(np.asarray(y, float))
        v = self.array
        x0, y0 = y[:, 0][:, None], y[:, 1][:, None]
        xa, ya = v[:, 0][None, :], v[:, 1][None, :]
        xb, yb = np.roll(v[:, 0], -1)[None, :], np.roll(v[:, 1], -1)[None, :]
        crosses = (ya > y0) != (yb > y0)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xa + (y0 - ya) * (xb - xa) / (yb - ya)
        inside = np.sum(crosses & (x0 < xint), axis=1) % 2 == 1
        # points on an edge are treated as outside (interfaces belong to the matrix)
        return inside & (self.distance_to_boundary(y) > 1e-14)

    def distance_to_boundary(self, y):
        y = np.atleast_2d(np.asarray(y, float))
        a = self.array
        b = np.roll(a, -1, axis=0)
        ab = b - a
        t = np.einsum("nkd,kd->nk", y[:, None, :] - a[None], ab) / np.einsum("kd,kd->k", ab, ab)
        t = np.clip(t, 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        return np.min(np.linalg.norm(y[:, None, :] - proj, axis=2), axis=1)

    def volume(self) -> float:
        v = self.array
        x, y = v[:, 0], v[:, 1]
        return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def boundary_samples(self, count=256):
        a = self.array
        b = np.roll(a, -1, axis=0)
        per = max(2, count // len(a))
        t = np.linspace(0, 1, per, endpoint=False)
        return (a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2)


@dataclass(frozen=True)
class CellGeometry:
    """Unit periodicity cell ``[0,1)^n`` with one inclusion.

    ``a0`` multiplies the inclusion stiffness (which is ``a0 * eps**2`` at
    scale ``eps``), ``a1`` is the matrix stiffness.
    """

    dimension: int
    inclusion: Ball | Polygon
    a0: float = 1.0
    a1: float = 1.0

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise GeometryError("geometry.dimension", f"must be 2 or 3, got {self.dimension}")
        for name in ("a0", "a1"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"geometry.{name}", "must be positive")
        inc = self.inclusion
        if isinstance(inc, Ball):
            if len(inc.center) != self.dimension:
                raise GeometryError("geometry.inclusion.center", "dimension mismatch")
            if not inc.radius > 0:
                raise GeometryError("geometry.inclusion.radius", "must be positive")
            c = np.asarray(inc.center, float)
            room = float(np.min(np.minimum(c, 1.0 - c)))
            if not inc.radius < room:
                raise GeometryError(
                    "geometry.inclusion.radius",
                    f"ball of radius {inc.radius} does not fit strictly inside the unit cell "
                    f"(max {room})",
                )
        elif isinstance(inc, Polygon):
            if self.dimension != 2:
                raise GeometryError("geometry.inclusion", "polygonal inclusions are 2D only")
            v = inc.array
            if np.any(v <= 0.0) or np.any(v >= 1.0):
                raise GeometryError("geometry.inclusion.vertices", "polygon must lie strictly inside the cell")
        else:
            raise GeometryError("geometry.inclusion", f"unsupported shape {type(inc).__name__}")

    @property
    def inclusion_volume(self) -> float:
        return self.inclusion.volume()

    @property
    def matrix_volume(self) -> float:
        return 1.0 - self.inclusion_volume


@dataclass(frozen=True)
class DefectBall:
    radius: float


@dataclass(frozen=True)
class DefectSpec:
    """Defect domain centred at the origin with stiffness ``a2``."""

    shape: DefectBall | Polygon
    a2: float = 1.0

    def __post_init__(self):
        if not self.a2 > 0:
            raise GeometryError("defect.a2", "must be positive")
        if isinstance(self.shape, DefectBall) and not self.shape.radius > 0:
            raise GeometryError("defect.radius", "must be positive")

    def inside(self, x):
        """Closed-set membership (interface points belong to the defect)."""
        x = np.atleast_2d(np.asarray(x, float))
        if isinstance(self.shape, DefectBall):
            return np.linalg.norm(x, axis=1) <= self.shape.radius
        return self.shape.contains(x) | (self.shape.distance_to_boundary(x) <= 1e-14)

    def signed_distance(self, x):
        """Negative inside, positive outside (exact for balls)."""
        x = np.atleast_2d(np.asarray(x, float))
        if isinstance(self.shape, DefectBall):
            return np.linalg.norm(x, axis=1) - self.shape.radius
        d = self.shape.distance_to_boundary(x)
        return np.where(self.shape.contains(x), -d, d)

    @property
    def diameter(self) -> float:
        if isinstance(self.shape, DefectBall):
            return 2.0 * self.shape.radius
        v = self.shape.array
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=2)))


class PolicyMode(str, Enum):
    DOUBLE_POROSITY = "double_porosity"
    ORDER_ONE = "order_one"
    POWER_LAW = "power_law"


@dataclass(frozen=True)
class BoundaryInclusionPolicy:
    """Stiffness of inclusion pieces cut by the defect boundary.

    ``double_porosity``: ``constant * eps**2``; ``order_one``: ``constant``;
    ``power_law``: ``constant * eps**(2 - theta)`` with ``0 < theta <= 2``.
    """

    mode: PolicyMode = PolicyMode.DOUBLE_POROSITY
    constant: float = 1.0
    theta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", PolicyMode(self.mode))
        if not self.constant > 0:
            raise GeometryError("validation.policy.constant", "must be positive")
        if self.mode is PolicyMode.POWER_LAW:
            if self.theta is None or not (0.0 < self.theta <= 2.0):
                raise GeometryError("validation.policy.theta", "power law exponent must lie in (0, 2]")

    def value(self, eps: float) -> float:
        if self.mode is PolicyMode.DOUBLE_POROSITY:
            return self.constant * eps**2
        if self.mode is PolicyMode.ORDER_ONE:
            return self.constant
        return self.constant * eps ** (2.0 - self.theta)


# --- phase classification ------------------------------------------------------

def _inclusion_center_and_extent(inclusion):
    if isinstance(inclusion, Ball):
        return np.asarray(inclusion.center, float), inclusion.radius
    v = inclusion.array
    c = v.mean(axis=0)
    return c, float(np.max(np.linalg.norm(v - c, axis=1)))


def copy_cut_by_defect(geom: CellGeometry, defect: DefectSpec, eps: float, cell_index):
    """Whether the inclusion copy in the given lattice cell meets the defect boundary.

    Exact centre-distance test for ball/ball, bounding-circle prefilter plus
    sampled boundary for other shapes.  ``cell_index`` is (N, d) integers.
    """
    cell_index = np.atleast_2d(np.asarray(cell_index, float))
    inc = geom.inclusion
    c, extent = _inclusion_center_and_extent(inc)
    centers = eps * (cell_index + c)
    if isinstance(inc, Ball) and isinstance(defect.shape, DefectBall):
        R = defect.shape.radius
        return np.abs(np.linalg.norm(centers, axis=1) - R) < eps * inc.radius
    sd = defect.signed_distance(centers)
    maybe = np.abs(sd) < eps * extent * 1.000001
    out = np.zeros(len(cell_index), bool)
    samples = inc.boundary_samples(512)
    for i in np.flatnonzero(maybe):
        pts = eps * (cell_index[i] + samples)
        s = defect.signed_distance(pts)
        out[i] = bool(np.any(s < 0) and np.any(s > 0))
    return out


def classify_points(geom: CellGeometry, defect: DefectSpec, eps: float, x) -> np.ndarray:
    """Vectorized :func:`classify_point` for an (N, d) array; returns int labels."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.atleast_2d(np.asarray(x, float))
    labels = np.full(len(x), int(PhaseLabel.MATRIX), dtype=np.int64)
    in_defect = defect.inside(x)
    labels[in_defect] = PhaseLabel.DEFECT
    rest = np.flatnonzero(~in_defect)
    y = x[rest] / eps
    cell = np.floor(y)
    local = y - cell
    in_inc = geom.inclusion.contains(local)
    idx = rest[in_inc]
    if len(idx):
        cut = copy_cut_by_defect(geom, defect, eps, cell[in_inc])
        labels[idx] = np.where(cut, int(PhaseLabel.BOUNDARY_INCLUSION), int(PhaseLabel.INCLUSION))
    return labels


def classify_point(geom: CellGeometry, defect: DefectSpec, eps: float, x) -> PhaseLabel:
    """Phase of a single point ``x`` at scale ``eps``."""
    return PhaseLabel(int(classify_points(geom, defect, eps, np.asarray(x, float)[None])[0]))


def phase_coefficients(geom, defect, policy, eps) -> dict:
    return {
        PhaseLabel.INCLUSION: geom.a0 * eps**2,
        PhaseLabel.MATRIX: geom.a1,
        PhaseLabel.DEFECT: defect.a2,
        PhaseLabel.BOUNDARY_INCLUSION: policy.value(eps),
    }


def coefficient_from_labels(labels, geom, defect, policy, eps) -> np.ndarray:
    table = np.empty(4)
    for k, v in phase_coefficients(geom, defect, policy, eps).items():
        table[int(k)] = v
    return table[np.asarray(labels, dtype=np.int64)]


def coefficient_at(geom, defect, policy, eps, x) -> float:
    """Stiffness ``a(x, eps)`` at a single point."""
    label = classify_point(geom, defect, eps, x)
    return float(phase_coefficients(geom, defect, policy, eps)[label])
