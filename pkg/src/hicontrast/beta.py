"""Zhikov's beta function and the band gaps it defines.

Three evaluations are provided:

* series over the inclusion spectrum,
  ``beta = lam + lam^2 sum <phi_j>^2 / (lam_j - lam)``;
* direct, ``beta = lam (1 + <V>)`` with ``-a0 Lap V = lam V + lam`` in the
  inclusion and ``V = 0`` on its boundary;
* closed form for ball inclusions (n = 2, 3).

Gaps are the open sets where ``beta < 0`` away from the poles.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from hicontrast.bessel import jv
from hicontrast.errors import FactorizationError, PoleProximityError
from hicontrast.fem.eigen import factorize
from hicontrast.fem.radial import RadialMesh
from hicontrast.inclusion import (
    InclusionSpectrum,
    ball_spectrum,
    fem_spectrum,
    inclusion_forms,
    inclusion_submesh,
)

POLE_GUARD = 1e-6
GAP_TOL = 1e-10
TAIL_TOL = 1e-4


def check_poles(lam, poles, guard=POLE_GUARD):
    """Raise :class:`PoleProximityError` if ``lam`` is within ``guard * lam_j`` of a pole."""
    poles = np.asarray(poles, float)
    if poles.size == 0:
        return
    i = int(np.argmin(np.abs(poles - lam)))
    if abs(lam - poles[i]) <= guard * poles[i]:
        raise PoleProximityError(float(lam), float(poles[i]))


# --- series ---------------------------------------------------------------------

def series_tail_bound(spectrum: InclusionSpectrum, lam) -> float:
    """Bound on the neglected part of the series at ``lam``.

    Every unlisted eigenvalue is at least the largest listed one and the
    unlisted squared means sum to at most ``|Q0| - sum <phi_j>^2``.
    """
    mass = spectrum.tail_mass()
    if mass == 0.0 or lam == 0.0:
        return 0.0
    top = spectrum.top_eigenvalue
    if lam >= top:
        return math.inf
    return lam * lam * mass / (top - lam)


def beta_series_with_tail(spectrum: InclusionSpectrum, lam, guard=POLE_GUARD, tail_tol=TAIL_TOL):
    """Truncated series value and its tail bound.

    The evaluation is refused (``ValueError``) when the tail bound exceeds
    ``tail_tol * max(1, lam)``.
    """
    lam = float(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    poles, w = spectrum.poles()
    check_poles(lam, poles, guard)
    tail = series_tail_bound(spectrum, lam)
    if tail > tail_tol * max(1.0, lam):
        raise ValueError(
            f"series tail bound {tail:.3e} at lambda={lam} exceeds tolerance; increase k_max"
        )
    return lam + lam * lam * float(np.sum(w / (poles - lam))), tail


def beta_series(spectrum: InclusionSpectrum, lam, guard=POLE_GUARD, tail_tol=TAIL_TOL) -> float:
    return beta_series_with_tail(spectrum, lam, guard, tail_tol)[0]


# --- direct -------------------------------------------------------------------

@dataclass
class VSolution:
    """Nodal values of ``V`` on the inclusion mesh and its cell average."""

    values: np.ndarray
    mean: float
    mesh: object = field(repr=False)


def solve_V(mesh, a0, lam, spectrum: InclusionSpectrum | None = None, guard=POLE_GUARD) -> VSolution:
    """Solve ``-a0 Lap V = lam V + lam`` in the inclusion, ``V = 0`` on its boundary.

    ``mesh`` is a cell mesh (the inclusion-tagged part is used), a mesh of the
    inclusion only, or a :class:`RadialMesh` for a ball.  The cell has unit
    volume, so ``<V>`` is the integral of ``V`` over the inclusion.  If a
    spectrum is given, ``lam`` is checked against all its eigenvalues.
    """
    lam = float(lam)
    if not isinstance(mesh, RadialMesh):
        mesh = inclusion_submesh(mesh)
    if spectrum is not None:
        check_poles(lam, spectrum.eigenvalues, guard)
    if lam == 0.0:
        return VSolution(np.zeros(mesh.n_points), 0.0, mesh)
    K, M, ones, C = inclusion_forms(mesh, a0)
    A = C.reduce(K.matrix - lam * M.matrix)
    b = lam * (C.prolong.T @ ones)
    lu = factorize(A)
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise FactorizationError(f"singular system for V at lambda={lam}")
    u = C.expand(x)
    V = mesh.field_values(u) if isinstance(mesh, RadialMesh) else u
    return VSolution(V, float(ones @ u), mesh)


def beta_direct(mesh, a0, lam, spectrum=None, guard=POLE_GUARD) -> float:
    lam = float(lam)
    if lam == 0.0:
        return 0.0
    return lam * (1.0 + solve_V(mesh, a0, lam, spectrum, guard).mean)


# --- closed form ----------------------------------------------------------------

def _one_minus_xcotx(x):
    if x < 1e-3:
        x2 = x * x
        return x2 / 3.0 + x2 * x2 / 45.0 + 2.0 * x2**3 / 945.0
    return 1.0 - x / math.tan(x)


@lru_cache(maxsize=256)
def _ball_poles(rho, a0, n, count):
    return ball_spectrum(rho, a0, n, k_max=count).poles()[0]


def beta_explicit_ball(rho, a0, lam, n=3, guard=POLE_GUARD) -> float:
    """Closed-form beta for a ball inclusion of radius ``rho``.

    n = 3: ``(1 - 4/3 pi rho^3) lam + 4 pi rho a0 (1 - k rho cot(k rho))``;
    n = 2: ``(1 - pi rho^2) lam + 2 pi rho a0 k J1(k rho) / J0(k rho)``;
    with ``k = sqrt(lam / a0)``.
    """
    lam = float(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam == 0.0:
        return 0.0
    check_poles(lam, _ball_poles(rho, a0, n, max(1, int(rho * math.sqrt(lam / a0) / math.pi) + 2)), guard)
    k = math.sqrt(lam / a0)
    x = k * rho
    if n == 3:
        return (1.0 - 4.0 / 3.0 * math.pi * rho**3) * lam + 4.0 * math.pi * rho * a0 * _one_minus_xcotx(x)
    if n == 2:
        ratio = float(jv(1, x)) / float(jv(0, x))
        return (1.0 - math.pi * rho**2) * lam + 2.0 * math.pi * rho * a0 * k * ratio
    raise ValueError("dimension must be 2 or 3")


# --- evaluator ------------------------------------------------------------------

@dataclass
class BetaEvaluator:
    """One beta evaluation method with its pole list.

    Build with :meth:`series`, :meth:`direct` or :meth:`explicit_ball`.  For
    the direct method the poles are the nonzero-mean eigenvalues of the same
    discretization, so the gap search brackets the discrete poles.
    """

    method: str
    spectrum: InclusionSpectrum | None = None
    mesh: object = None
    a0: float = 1.0
    rho: float | None = None
    dimension: int = 3
    poles: np.ndarray = field(default_factory=lambda: np.zeros(0))
    guard: float = POLE_GUARD
    tail_tol: float = TAIL_TOL

    @classmethod
    def series(cls, spectrum: InclusionSpectrum, **kw):
        return cls("series", spectrum=spectrum, a0=spectrum.a0, poles=spectrum.poles()[0], **kw)

    @classmethod
    def direct(cls, mesh, a0=1.0, k_max=20, **kw):
        spec = fem_spectrum(mesh, a0, k_max)
        return cls("direct", spectrum=spec, mesh=spec.extras["mesh"], a0=a0, poles=spec.poles()[0], **kw)

    @classmethod
    def explicit_ball(cls, rho, a0=1.0, n=3, k_max=20, **kw):
        spec = ball_spectrum(rho, a0, n, k_max)
        return cls("explicit", spectrum=spec, a0=a0, rho=rho, dimension=n, poles=spec.poles()[0], **kw)

    def __call__(self, lam) -> float:
        if self.method == "series":
            return beta_series(self.spectrum, lam, self.guard, self.tail_tol)
        if self.method == "direct":
            return beta_direct(self.mesh, self.a0, lam, self.spectrum, self.guard)
        if self.method == "explicit":
            return beta_explicit_ball(self.rho, self.a0, lam, self.dimension, self.guard)
        raise ValueError(f"unknown beta method {self.method!r}")

    def tail_bound(self, lam) -> float:
        if self.method == "series":
            return series_tail_bound(self.spectrum, float(lam))
        return 0.0

    def derivative(self, lam, step=None) -> float:
        h = step if step is not None else 1e-6 * max(1.0, abs(lam))
        return (self(lam + h) - self(lam - h)) / (2 * h)


# --- gaps -----------------------------------------------------------------------

@dataclass(frozen=True)
class Gap:
    lower: float
    upper: float
    lower_kind: str
    upper_kind: str
    midpoint_beta: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, lam) -> bool:
        return self.lower < lam < self.upper


@dataclass
class GapTable:
    """Ascending disjoint open intervals on which beta is negative.

    Endpoint kinds: ``pole`` (a nonzero-mean eigenvalue), ``zero`` (a root of
    beta, located to ``gap_tol``) or ``truncated`` (the scan limit).
    """

    gaps: list
    lam_max: float
    method: str = ""
    gap_tol: float = GAP_TOL

    def __len__(self):
        return len(self.gaps)

    def __iter__(self):
        return iter(self.gaps)

    def __getitem__(self, i):
        return self.gaps[i]

    def containing(self, lam):
        for g in self.gaps:
            if g.contains(lam):
                return g
        return None

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "lower", "upper", "lower_kind", "upper_kind", "midpoint_beta"])
            for i, g in enumerate(self.gaps, start=1):
                w.writerow([i, repr(g.lower), repr(g.upper), g.lower_kind, g.upper_kind, repr(g.midpoint_beta)])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lam_max": self.lam_max,
            "gap_tol": self.gap_tol,
            "gaps": [asdict(g) for g in self.gaps],
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _bisect(f, a, b, fa, tol):
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def find_gaps(evaluator, lam_max, gap_tol=GAP_TOL, samples=64) -> GapTable:
    """Locate the intervals of (0, lam_max) where beta < 0.

    Each interval between consecutive poles is sampled (densely near both
    poles) to bracket sign changes, which are refined by bisection.
    """
    poles = np.asarray(evaluator.poles, float)
    poles = poles[poles < lam_max]
    if len(poles) == 0:
        return GapTable([], float(lam_max), evaluator.method, gap_tol)
    edges = [0.0, *poles.tolist(), float(lam_max)]
    offset = 100.0 * evaluator.guard
    gaps = []
    current = None  # (lower, kind) of a gap still open
    for k in range(len(edges) - 1):
        a, b = edges[k], edges[k + 1]
        left_pole, right_pole = k > 0, k < len(edges) - 2
        lo = a * (1 + offset) if left_pole else a
        hi = b * (1 - offset) if right_pole else b
        if hi <= lo:
            continue
        # geometric clustering towards the poles, where beta varies fastest
        s = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, samples))
        pts = lo + (hi - lo) * s
        if not left_pole:
            pts = pts[1:]  # beta(0) = 0
        vals = np.array([evaluator(t) for t in pts])
        if left_pole and vals[0] < 0:
            current = (a, "pole")
        elif not left_pole and vals[0] < 0:
            current = (0.0, "zero")
        for i in range(len(pts) - 1):
            if (vals[i] < 0) != (vals[i + 1] < 0):
                z = _bisect(evaluator, pts[i], pts[i + 1], vals[i], gap_tol)
                if vals[i] < 0:
                    gaps.append((current[0], z, current[1], "zero"))
                    current = None
                else:
                    current = (z, "zero")
        if current is not None:
            if right_pole:
                gaps.append((current[0], b, current[1], "pole"))
            else:
                gaps.append((current[0], b, current[1], "truncated"))
            current = None
    out = []
    for lower, upper, lk, uk in gaps:
        mid = 0.5 * (lower + upper)
        out.append(Gap(float(lower), float(upper), lk, uk, float(evaluator(mid))))
    return GapTable(out, float(lam_max), evaluator.method, gap_tol)
