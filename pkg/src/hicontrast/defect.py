"""Localized modes of the limit problem with a defect.

Outside the defect the macroscopic field solves ``-div(A_hom grad u) = beta(lam) u``,
inside ``-a2 Lap u = lam u``, with continuity of ``u`` and of the flux across
the defect boundary.  For ``lam`` in a gap ``beta(lam) < 0``, so solutions
decay with rate ``kappa = sqrt(|beta| / a_hom)``.

Ball defects with isotropic ``A_hom`` separate in polar/spherical
coordinates: the radial factor is ``r^{-(n-2)/2} J_m(sqrt(lam/a2) r)`` inside
and ``alpha r^{-(n-2)/2} K_m(kappa r)`` outside (``K_m`` the decaying
Macdonald function).  General 2D defects use the symmetric pencil
``P(lam) = K - lam M_defect - beta(lam) M_outside`` on a truncated disk.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre
from scipy.optimize import brentq

from hicontrast.beta import BetaEvaluator, Gap, solve_V
from hicontrast.bessel import jv, jvp, kv, kve
from hicontrast.errors import ConfigError, ConvergenceError, FactorizationError, OutOfGapError
from hicontrast.fem.assembly import assemble, lumped_volume
from hicontrast.fem.constraints import dirichlet_elimination
from hicontrast.fem.eigen import eig_shift_invert
from hicontrast.fem.mesh import SimplicialMesh
from hicontrast.fem.radial import RadialMesh
from hicontrast.geometry import PhaseLabel

N_GRID = 400
LAMBDA_TOL = 1e-11
KAPPA_RMAX = 6.0
MIN_KAPPA_RMAX = 4.0
MULT_WINDOW = 1e-4


# --- parameters -----------------------------------------------------------------

@dataclass(frozen=True)
class AngularIndex:
    """Order ``m`` of the radial Bessel factor.

    ``m^2 - (n-2)^2/4`` is the Laplace-Beltrami eigenvalue ``l (l + n - 2)``,
    so ``m = l`` in 2D and ``m = l + 1/2`` in 3D.
    """

    n: int
    m: float

    def __post_init__(self):
        if self.n == 2:
            ok = self.m >= 0 and float(self.m).is_integer()
        elif self.n == 3:
            ok = self.m > 0 and (self.m - 0.5) >= 0 and float(self.m - 0.5).is_integer()
        else:
            ok = False
        if not ok:
            raise ConfigError("modes.m_list", f"invalid angular order {self.m} for n={self.n}")

    @classmethod
    def from_degree(cls, n, l):
        return cls(n, l if n == 2 else l + 0.5)

    @property
    def degree(self) -> int:
        return int(round(self.m if self.n == 2 else self.m - 0.5))

    @property
    def laplace_beltrami(self) -> float:
        return self.m**2 - (self.n - 2) ** 2 / 4.0

    @property
    def multiplicity(self) -> int:
        l = self.degree
        if self.n == 2:
            return 1 if l == 0 else 2
        return 2 * l + 1


def angular_orders(n, count):
    """The first ``count`` valid orders (``0, 1, ...`` or ``1/2, 3/2, ...``)."""
    return [AngularIndex.from_degree(n, l).m for l in range(count)]


@dataclass(frozen=True)
class RadialParams:
    n: int
    a2: float
    a_hom: float
    R: float
    beta: BetaEvaluator = field(repr=False)

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ConfigError("geometry.dimension", "must be 2 or 3")
        for name in ("a2", "a_hom", "R"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"defect.{name}", "must be positive")

    @property
    def nu(self) -> float:
        return (self.n - 2) / 2.0


# --- radial matching ------------------------------------------------------------

def _rates(lam, p: RadialParams):
    b = float(p.beta(lam))
    if not b < 0:
        raise OutOfGapError(float(lam), b)
    return math.sqrt(lam / p.a2), math.sqrt(-b / p.a_hom), b


def _matching_matrix(lam, m, p: RadialParams):
    """Matching system in (interior coefficient, exp-scaled alpha), unscaled rows."""
    k2, kappa, b = _rates(lam, p)
    R, nu = p.R, p.nu
    x, z = k2 * R, kappa * R
    J, Jp = float(jv(m, x)), float(jvp(m, x))
    Ks = float(kve(m, z))
    Kps = m / z * Ks - float(kve(m + 1, z))
    s = R ** (-nu)
    M = np.array([
        [s * J, -s * Ks],
        [p.a2 * s * (k2 * Jp - nu * J / R), -p.a_hom * s * (kappa * Kps - nu * Ks / R)],
    ])
    return M, k2, kappa, b


def _scaled(M):
    scales = np.max(np.abs(M), axis=1)
    return M / scales[:, None], scales


def radial_dispersion(lam, m, params: RadialParams) -> float:
    """Determinant of the row-scaled 2x2 matching system at ``lam``.

    Rows are continuity of ``u`` and of the flux at ``r = R``; each row is
    divided by its largest coefficient.  Zero iff a matching mode exists.
    """
    M, *_ = _matching_matrix(lam, m, params)
    S, _ = _scaled(M)
    return float(S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0])


def radsymm_residual(lam, params: RadialParams) -> float:
    """Trigonometric solvability condition for n = 3, m = 1/2.

    ``cot(k2 R) + (a_hom - a2)/(sqrt(lam a2) R) + sqrt(a_hom |beta| / (lam a2))``.
    """
    if params.n != 3:
        raise ValueError("the trigonometric condition is for n = 3")
    k2, kappa, b = _rates(lam, params)
    a2, ah, R = params.a2, params.a_hom, params.R
    return (1.0 / math.tan(k2 * R) + (ah - a2) / (math.sqrt(lam * a2) * R)
            + math.sqrt(ah * abs(b) / (lam * a2)))


def radsymm_factor(lam, params: RadialParams) -> float:
    """Nonzero factor with ``radsymm_residual = radial_dispersion(m=1/2) * factor``."""
    M, k2, kappa, _ = _matching_matrix(lam, 0.5, params)
    _, (s1, s2) = _scaled(M)
    A = math.sqrt(2.0 / (math.pi * k2))
    B = math.sqrt(math.pi / (2.0 * kappa))
    R = params.R
    return s1 * s2 * R * R / (A * B * math.sin(k2 * R) * params.a2 * k2)


# --- modes ----------------------------------------------------------------------

@dataclass
class LocalizedMode:
    """An eigenvalue of the limit problem in a gap and its macroscopic profile.

    Radial modes carry ``m``, ``alpha`` (interior coefficient fixed to 1) and
    interface residuals; FEM modes carry nodal ``fields`` on ``mesh``.
    """

    eigenvalue: float
    m: float | None
    multiplicity: int
    kappa: float
    beta_value: float
    alpha: float | None = None
    params: RadialParams | None = field(default=None, repr=False)
    mesh: SimplicialMesh | None = field(default=None, repr=False)
    fields: np.ndarray | None = field(default=None, repr=False)
    residuals: dict = field(default_factory=dict)
    method: str = "radial"

    # radial profile
    def interior(self, r):
        p = self.params
        k2 = math.sqrt(self.eigenvalue / p.a2)
        r = np.maximum(np.asarray(r, float), 1e-300)
        return r ** (-p.nu) * jv(self.m, k2 * r)

    def exterior(self, r):
        p = self.params
        r = np.asarray(r, float)
        return self.alpha * r ** (-p.nu) * kv(self.m, self.kappa * r)

    def radial_profile(self, r):
        r = np.atleast_1d(np.asarray(r, float))
        out = np.empty_like(r)
        inner = r <= self.params.R
        out[inner] = self.interior(r[inner])
        out[~inner] = self.exterior(r[~inner])
        return out

    def angular(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        if self.params.n == 2:
            return np.cos(self.m * np.arctan2(x[:, 1], x[:, 0]))
        l = AngularIndex(3, self.m).degree
        r = np.linalg.norm(x, axis=1)
        c = np.divide(x[:, 2], r, out=np.ones_like(r), where=r > 0)
        return legendre.legval(c, [0] * l + [1])

    def u0(self, x):
        """Macroscopic field (one member of the angular family) at points ``x``."""
        x = np.atleast_2d(np.asarray(x, float))
        if self.method == "fem":
            return self.mesh.interpolate(self.fields[:, 0], x)
        return self.radial_profile(np.linalg.norm(x, axis=1)) * self.angular(x)

    def decay_rate_fit(self, r0=None, r1=None, samples=64) -> float:
        """Slope of ``log(r^{(n-1)/2} |u|)`` on the exterior (should equal ``kappa``).

        The ``r^{(n-1)/2}`` factor removes the algebraic prefactor of
        ``K_m(kappa r)``; the remaining relative correction to the slope is
        about ``(4 m^2 - 1) / (8 (kappa r)^2)``, so the default window starts
        ``2 + 4 m^2`` decay lengths out (radial modes) and spans ten of them.
        FEM modes use ``[R + 2/kappa, R + 5/kappa]`` inside the truncation.
        """
        R = self.params.R if self.params else 1.0
        if self.method == "fem":
            r0 = r0 if r0 is not None else R + 2.0 / self.kappa
            r1 = r1 if r1 is not None else R + 5.0 / self.kappa
        else:
            start = 2.0 + 4.0 * float(self.m) ** 2
            r0 = r0 if r0 is not None else R + start / self.kappa
            r1 = r1 if r1 is not None else R + (start + 10.0) / self.kappa
        r = np.linspace(r0, r1, samples)
        n = self.params.n if self.params else 2
        if self.method == "fem":
            x = np.column_stack([r, np.zeros_like(r)])
            u = np.abs(self.u0(x))
        else:
            u = np.abs(self.radial_profile(r))
        y = np.log(u * r ** ((n - 1) / 2.0))
        slope = np.polyfit(r, y, 1)[0]
        return float(-slope)

    def to_dict(self) -> dict:
        return {
            "lambda0": self.eigenvalue,
            "m": self.m,
            "multiplicity": self.multiplicity,
            "alpha": self.alpha,
            "kappa": self.kappa,
            "beta": self.beta_value,
            "method": self.method,
            "residuals": self.residuals,
        }


def interface_residuals(mode: LocalizedMode) -> dict:
    """Relative mismatch of value and flux at ``r = R``."""
    p = mode.params
    R, nu, m = p.R, p.nu, mode.m
    k2, kappa = math.sqrt(mode.eigenvalue / p.a2), mode.kappa
    f = R ** (-nu) * float(jv(m, k2 * R))
    fp = R ** (-nu) * (k2 * float(jvp(m, k2 * R)) - nu * float(jv(m, k2 * R)) / R)
    K = float(kv(m, kappa * R))
    Kp = m / (kappa * R) * K - float(kv(m + 1, kappa * R))
    g = mode.alpha * R ** (-nu) * K
    gp = mode.alpha * R ** (-nu) * (kappa * Kp - nu * K / R)
    cont = abs(f - g) / max(abs(f), abs(g), 1e-300)
    flux = abs(p.a2 * fp - p.a_hom * gp) / max(abs(p.a2 * fp), abs(p.a_hom * gp), 1e-300)
    return {"continuity": cont, "flux": flux}


def _gap_bounds(gap):
    if isinstance(gap, Gap):
        return gap.lower, gap.upper
    lo, hi = gap
    return float(lo), float(hi)


def _radial_mode(lam, m, params) -> LocalizedMode:
    M, k2, kappa, b = _matching_matrix(lam, m, params)
    J = float(jv(m, k2 * params.R))
    alpha = J / (float(kve(m, kappa * params.R)) * math.exp(-kappa * params.R))
    mode = LocalizedMode(float(lam), m, AngularIndex(params.n, m).multiplicity, kappa, b, alpha,
                         params)
    mode.residuals = interface_residuals(mode)
    mode.residuals["dispersion"] = radial_dispersion(lam, m, params)
    return mode


def find_radial_modes(params: RadialParams, gap, m_list, n_grid=N_GRID, tol=LAMBDA_TOL):
    """All radial modes in ``gap`` for each angular order in ``m_list``.

    The open gap is sampled at ``n_grid`` equally spaced interior points;
    points where ``beta >= 0`` are skipped.  Sign changes of the dispersion
    function are refined by Brent's bracketing method to ``tol`` in lambda.
    """
    lo, hi = _gap_bounds(gap)
    lams = lo + (hi - lo) * (np.arange(1, n_grid + 1) / (n_grid + 1))
    modes = []
    for m in m_list:
        AngularIndex(params.n, m)
        vals = np.full(n_grid, np.nan)
        for i, lam in enumerate(lams):
            try:
                vals[i] = radial_dispersion(lam, m, params)
            except OutOfGapError:
                continue
        for i in range(n_grid - 1):
            a, b = vals[i], vals[i + 1]
            if not (np.isfinite(a) and np.isfinite(b)) or (a < 0) == (b < 0):
                continue
            root = brentq(radial_dispersion, lams[i], lams[i + 1], args=(m, params),
                          xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
            modes.append(_radial_mode(root, m, params))
    modes.sort(key=lambda md: (md.eigenvalue, md.m))
    return modes


# --- pencil method (2D, general defects) ----------------------------------------

def _scalar_hom(A_hom):
    A = np.atleast_2d(np.asarray(getattr(A_hom, "A", A_hom), float))
    if A.size == 1:
        return float(A[0, 0]), None
    return float(np.trace(A) / A.shape[0]), A


@dataclass
class DefectPencil:
    """Reduced matrices of ``P(lam) = K - lam M_in - beta(lam) M_out`` on a truncated disk."""

    mesh: SimplicialMesh
    K: object
    M_in: object
    M_out: object
    constraint: object
    beta: BetaEvaluator = field(repr=False)

    @property
    def M(self):
        return self.M_in + self.M_out

    def matrix(self, lam):
        return self.K - lam * self.M_in - float(self.beta(lam)) * self.M_out

    def sigmas(self, lam, k=4):
        """``k`` eigenvalues of ``P(lam) v = sigma M v`` nearest zero, ascending, with vectors."""
        P = self.matrix(lam)
        try:
            pairs = eig_shift_invert(P, self.M, 0.0, k)
        except FactorizationError:
            shift = 1e-9 * max(1.0, abs(lam))
            pairs = eig_shift_invert(P, self.M, shift, k)
        order = np.argsort([p.eigenvalue for p in pairs])
        vals = np.array([pairs[i].eigenvalue for i in order])
        vecs = np.column_stack([pairs[i].eigenvector for i in order])
        return vals, vecs

    def sigma_min(self, lam, k=4) -> float:
        vals, _ = self.sigmas(lam, k)
        return float(vals[np.argmin(np.abs(vals))])


def truncate_disk(mesh: SimplicialMesh, R_max) -> SimplicialMesh:
    """Cells inside ``|x| < R_max``; requires a fitted circle at ``R_max``."""
    r = np.linalg.norm(mesh.points, axis=1)
    rmax = float(r.max())
    if R_max >= rmax * (1 - 1e-12):
        return mesh
    inside = np.linalg.norm(mesh.centroids(), axis=1) < R_max
    sub, _ = mesh.submesh(inside)
    rb = np.linalg.norm(sub.points[sub.boundary_nodes()], axis=1)
    if np.max(np.abs(rb - R_max)) > 1e-9 * R_max:
        raise ConfigError("modes.R_max", "mesh has no fitted circle at the truncation radius")
    return sub


def _mass(mesh, cells, scheme):
    M = assemble(mesh, 1.0, "mass", cells=cells).matrix
    if scheme == "consistent":
        return M
    if scheme != "blended":
        raise ConfigError("modes.mass", f"unknown mass scheme {scheme!r}")
    return 0.5 * (M + sp.diags(lumped_volume(mesh, cells)))


def build_pencil(mesh, A_hom, a2, beta, R_max=None, mass="blended") -> DefectPencil:
    """Pencil on ``mesh`` (truncated at ``R_max``).

    ``mass="blended"`` averages the consistent and lumped masses; their
    O(h^2) eigenvalue errors have opposite signs and largely cancel.
    """
    if mesh.dim != 2:
        raise ConfigError("geometry.dimension", "the pencil solver handles 2D defects only")
    if R_max is not None:
        mesh = truncate_disk(mesh, R_max)
    a_scalar, tensor = _scalar_hom(A_hom)
    inner = mesh.cell_tags == int(PhaseLabel.DEFECT)
    outer = ~inner
    K = assemble(mesh, a2, "stiffness", cells=inner).matrix
    if tensor is None:
        K = K + assemble(mesh, a_scalar, "stiffness", cells=outer).matrix
    else:
        K = K + assemble(mesh, 1.0, "stiffness", cells=outer, tensor=tensor).matrix
    Mi = _mass(mesh, inner, mass)
    Mo = _mass(mesh, outer, mass)
    C = dirichlet_elimination(mesh.n_points, mesh.boundary_nodes(), used=np.unique(mesh.cells))
    return DefectPencil(mesh, C.reduce(K), C.reduce(Mi), C.reduce(Mo), C, beta)


def _refine_crossing(f, a, b, fa, fb, tol, max_iter=100):
    """Shrink ``[a, b]`` keeping ``f(a) > 0 > f(b)`` (Illinois regula falsi + bisection)."""
    trace = []
    side = 0
    for _ in range(max_iter):
        if b - a <= tol:
            return 0.5 * (a + b), trace
        width = b - a
        c = b - fb * (b - a) / (fb - fa)
        if not (a + 0.01 * width < c < b - 0.01 * width):
            c = 0.5 * (a + b)
        fc = f(c)
        trace.append((c, fc))
        if fc == 0.0:
            return c, trace
        if fc > 0:
            a, fa = c, fc
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb = c, fc
            if side == 1:
                fa *= 0.5
            side = 1
        if b - a > 0.5 * width and len(trace) % 3 == 0:
            m = 0.5 * (a + b)
            fm = f(m)
            trace.append((m, fm))
            if fm > 0:
                a, fa = m, fm
            else:
                b, fb = m, fm
    raise ConvergenceError("pencil root refinement stagnated", residual=b - a, trace=trace)


def _angular_order(mesh, u, radius, samples=256):
    t = 2 * np.pi * np.arange(samples) / samples
    vals = mesh.interpolate(u, radius * np.column_stack([np.cos(t), np.sin(t)]))
    spec = np.abs(np.fft.rfft(vals))
    return int(np.argmax(spec))


def default_truncation(R, a_hom, beta, gap):
    lo, hi = _gap_bounds(gap)
    kappa = math.sqrt(abs(beta(0.5 * (lo + hi))) / a_hom)
    return R + KAPPA_RMAX / kappa, kappa


def general_defect_modes(mesh, A_hom, a2, beta, gap, R_max=None, k_window=4, n_scan=40,
                         tol=None, defect_radius=None, mult_window=MULT_WINDOW, mass="blended"):
    """Modes of a 2D defect of any shape by the pencil method.

    ``mesh`` covers a disk around the defect (cells tagged ``DEFECT`` inside)
    with a fitted circle at ``R_max`` if truncation is requested.  ``sigma``,
    the pencil eigenvalue nearest zero, decreases through zero at each mode;
    sign changes from + to - on an ``n_scan`` grid are refined to ``tol``.
    The multiplicity is the number of pencil eigenvalues changing sign
    across ``root * (1 -+ mult_window)``, which absorbs the small splitting
    of symmetric pairs on meshes with only a discrete symmetry group.
    """
    lo, hi = _gap_bounds(gap)
    a_scalar, _ = _scalar_hom(A_hom)
    if R_max is None:
        R_max = float(np.max(np.linalg.norm(mesh.points, axis=1)))
    kappa_mid = math.sqrt(abs(beta(0.5 * (lo + hi))) / a_scalar)
    if kappa_mid * R_max < MIN_KAPPA_RMAX:
        raise ConfigError("modes.R_max", f"kappa*R_max = {kappa_mid * R_max:.3g} < {MIN_KAPPA_RMAX}")
    pencil = build_pencil(mesh, A_hom, a2, beta, R_max, mass)
    lams = lo + (hi - lo) * (np.arange(1, n_scan + 1) / (n_scan + 1))
    vals = []
    for lam in lams:
        if not beta(lam) < 0:
            vals.append(np.nan)
            continue
        vals.append(pencil.sigma_min(lam, k_window))
    vals = np.array(vals)
    modes = []
    for i in range(n_scan - 1):
        a, b = vals[i], vals[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)) or not (a > 0 > b):
            continue
        tl = tol if tol is not None else 1e-10 * max(1.0, lams[i])
        root, trace = _refine_crossing(lambda t: pencil.sigma_min(t, k_window), lams[i], lams[i + 1],
                                       a, b, tl)
        delta = max(50 * tl, mult_window * root)
        if modes and root - modes[-1].eigenvalue < 2 * delta:
            continue  # second member of a split pair, already counted
        left, _ = pencil.sigmas(root - delta, k_window)
        right, _ = pencil.sigmas(root + delta, k_window)
        mult = int(np.sum(right < 0) - np.sum(left < 0))
        s0, vecs = pencil.sigmas(root, k_window)
        near = np.argsort(np.abs(s0))[:max(mult, 1)]
        fields = pencil.constraint.expand(vecs[:, near])
        bval = float(beta(root))
        kappa = math.sqrt(-bval / a_scalar)
        m_est = None
        if defect_radius is not None:
            m_est = _angular_order(pencil.mesh, fields[:, 0], defect_radius)
        mode = LocalizedMode(float(root), m_est, max(mult, 1), kappa, bval, None, None,
                             pencil.mesh, fields, method="fem")
        mode.residuals = {"sigma": float(s0[near[0]]), "iterations": len(trace),
                          "crossings": mult, "R_max": float(R_max)}
        if defect_radius is not None:
            mode.params = RadialParams(2, a2, a_scalar, defect_radius, beta)
        modes.append(mode)
    return modes


# --- composite eigenfunction ----------------------------------------------------

@dataclass
class ModeField:
    """Limit eigenfunction ``(u0(x), v(x, y) = u0(x) V(y))``."""

    mode: LocalizedMode
    V_values: np.ndarray = field(repr=False)
    V_mesh: object = field(repr=False)
    inclusion_center: np.ndarray = field(default=None, repr=False)
    defect: object = None

    def u0(self, x):
        return self.mode.u0(x)

    def V(self, y):
        """Microscopic profile at cell points ``y`` (taken modulo 1), zero outside the inclusion."""
        y = np.mod(np.atleast_2d(np.asarray(y, float)), 1.0)
        if isinstance(self.V_mesh, RadialMesh):
            c = self.inclusion_center if self.inclusion_center is not None else np.full(y.shape[1], 0.5)
            r = np.linalg.norm(y - c, axis=1)
            out = np.interp(r, self.V_mesh.nodes, self.V_values)
            out[r >= self.V_mesh.radius] = 0.0
            return out
        return self.V_mesh.interpolate(self.V_values, y, outside=0.0)

    def in_defect(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        if self.defect is not None:
            return self.defect.inside(x)
        R = self.mode.params.R if self.mode.params else 0.0
        return np.linalg.norm(x, axis=1) <= R

    def v(self, x, y):
        """``u0(x) V(y)``, extended by zero for ``x`` in the defect."""
        out = self.u0(x) * self.V(y)
        out[self.in_defect(x)] = 0.0
        return out


def assemble_mode_field(mode: LocalizedMode, inclusion_mesh, a0, defect=None,
                        inclusion_center=None) -> ModeField:
    """Attach the microscopic field ``V`` solved at the mode's eigenvalue."""
    sol = solve_V(inclusion_mesh, a0, mode.eigenvalue)
    return ModeField(mode, sol.values, sol.mesh, inclusion_center, defect)


def modes_to_json(modes, path) -> None:
    from pathlib import Path

    Path(path).write_text(json.dumps([m.to_dict() for m in modes], indent=2))
