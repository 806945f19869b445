"""Fine-scale simulation of the high-contrast operator near a predicted eigenvalue.

The domain is the union of the lattice cells ``eps ([i, i+1] x [j, j+1])``
covering the disk ``|x| <= R_max``, with a Dirichlet condition on its outer
boundary.  Cells away from the defect circle are copies of one periodic cell
mesh; the band of cells met by the circle is meshed by Triangle with the
defect circle and the inclusion circles (split at their intersections)
fitted exactly.  Elements are labelled by their centroid.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hicontrast.beta import BetaEvaluator
from hicontrast.defect import LocalizedMode, ModeField, assemble_mode_field
from hicontrast.errors import ConfigError, ConvergenceError, GeometryError
from hicontrast.fem.assembly import assemble
from hicontrast.fem.constraints import dirichlet_elimination
from hicontrast.fem.eigen import eig_in_window
from hicontrast.fem.mesh import SimplicialMesh
from hicontrast.fem.meshing import _loop_segments, _triangulate, merge_vertices, periodic_cell_mesh
from hicontrast.geometry import (
    Ball,
    BoundaryInclusionPolicy,
    CellGeometry,
    DefectBall,
    DefectSpec,
    PhaseLabel,
    classify_points,
    coefficient_from_labels,
)

CELLS_PER_INCLUSION = 8
SLIVER_FRACTION = 0.05


def epsilon_index(eps) -> int:
    k = int(round(1.0 / eps))
    if k < 1 or abs(1.0 / eps - k) > 1e-9 * k:
        raise ConfigError("validation.eps_list", f"eps={eps} is not the reciprocal of an integer")
    return k


def cell_mesh_for(geom: CellGeometry, cells_per_inclusion=CELLS_PER_INCLUSION) -> SimplicialMesh:
    """Periodic cell mesh with ``cells_per_inclusion`` elements across the inclusion diameter."""
    inc = geom.inclusion
    if geom.dimension != 2 or not isinstance(inc, Ball) or not np.allclose(inc.center, 0.5):
        raise ConfigError("geometry.inclusion", "fine-scale runs need a centred disk inclusion in 2D")
    h_inc = 2.0 * inc.radius / cells_per_inclusion
    h_mat = min(2.0 * h_inc, 0.5 - inc.radius)
    return periodic_cell_mesh(inc.radius, max(h_mat, h_inc), inclusion_h=h_inc)


@dataclass
class EpsilonProblem:
    eps: float
    geom: CellGeometry
    defect: DefectSpec | None
    policy: BoundaryInclusionPolicy
    R_max: float
    cells_per_inclusion: int
    mesh: SimplicialMesh = field(repr=False)
    coefficient: np.ndarray = field(repr=False)
    K: object = field(repr=False)
    M: object = field(repr=False)
    constraint: object = field(repr=False)
    half_width: float = 0.0
    band_cells: int = 0

    @property
    def labels(self) -> np.ndarray:
        return self.mesh.cell_tags

    @property
    def n_dofs(self) -> int:
        return self.constraint.n_free

    def phase_areas(self) -> dict:
        vol = self.mesh.volumes()
        return {PhaseLabel(k).name.lower(): float(vol[self.labels == k].sum()) for k in range(4)}

    def rayleigh_quotient(self, u) -> float:
        x = self.constraint.prolong.T @ u
        return float(x @ (self.K @ x) / (x @ (self.M @ x)))


def _circle_intersections(c, r, R):
    """Intersection points of the circle (c, r) with the circle (0, R)."""
    d = float(np.linalg.norm(c))
    a = (R * R - r * r + d * d) / (2 * d)
    hgt2 = R * R - a * a
    if hgt2 <= 0:
        return None, 0.0
    hgt = math.sqrt(hgt2)
    e = c / d
    perp = np.array([-e[1], e[0]])
    return np.array([a * e + hgt * perp, a * e - hgt * perp]), 2 * hgt


def _polyline_circle(center, radius, spacing, extra):
    """Closed polygon on a circle with vertices every ``spacing`` plus the ``extra`` points."""
    n = max(8, int(math.ceil(2 * math.pi * radius / spacing)))
    t = 2 * math.pi * np.arange(n) / n
    if extra is not None and len(extra):
        te = np.mod(np.arctan2(extra[:, 1] - center[1], extra[:, 0] - center[0]), 2 * math.pi)
        step = 2 * math.pi / n
        gap = np.abs((t[:, None] - te[None, :] + math.pi) % (2 * math.pi) - math.pi)
        keep = np.all(gap > 0.4 * step, axis=1)
        pts = np.vstack([center + radius * np.column_stack([np.cos(t[keep]), np.sin(t[keep])]), extra])
        ang = np.concatenate([t[keep], te])
        return pts[np.argsort(ang, kind="stable")]
    return center + radius * np.column_stack([np.cos(t), np.sin(t)])


def _band_mesh(band, side, eps, rho, R, h, inc_spacing, hole=None):
    """Triangle mesh of the band cells with fitted defect and inclusion circles."""
    band_set = {tuple(b) for b in band}
    verts, segs = [], []
    nv = 0

    def add_chain(pts, closed):
        nonlocal nv
        verts.append(pts)
        if closed:
            segs.append(_loop_segments(nv, len(pts)))
        else:
            idx = nv + np.arange(len(pts))
            segs.append(np.column_stack([idx[:-1], idx[1:]]))
        nv += len(pts)

    # boundary of the band: cell sides facing a non-band cell
    for i, j in band:
        for di, dj, start, direction in ((0, -1, (0, 0), (1, 0)), (1, 0, (1, 0), (0, 1)),
                                         (0, 1, (0, 1), (1, 0)), (-1, 0, (0, 0), (0, 1))):
            if (i + di, j + dj) in band_set:
                continue
            local = np.asarray(start, float) + side[:, None] * np.asarray(direction, float)
            add_chain((local + np.array([i, j], float)) * eps, closed=False)
    # inclusion circles and their crossings with the defect circle
    crossings = []
    for i, j in band:
        c = (np.array([i, j], float) + 0.5) * eps
        pts, chord = (None, 0.0)
        if abs(np.linalg.norm(c) - R) < rho * eps:
            pts, chord = _circle_intersections(c, rho * eps, R)
            if pts is None or chord < SLIVER_FRACTION * h:
                raise GeometryError("validation.eps_list",
                                    f"inclusion copy ({i}, {j}) meets the defect boundary in a sliver "
                                    f"(chord {chord:.2e} at eps={eps})")
            crossings.append(pts)
        add_chain(_polyline_circle(c, rho * eps, inc_spacing, pts), closed=True)
    extra = np.vstack(crossings) if crossings else None
    add_chain(_polyline_circle(np.zeros(2), R, h, extra), closed=True)
    V = np.vstack(verts)
    S = np.vstack(segs)
    V, S = merge_vertices(V, S, scale=eps, decimals=9)
    S = S[S[:, 0] != S[:, 1]]
    S = np.unique(np.sort(S, axis=1), axis=0)
    out = _triangulate(V, S, np.zeros(len(V)), np.ones(len(S)), h, holes=hole, fixed_boundary=True)
    tri = out["triangles"].astype(np.int64)
    P = out["vertices"]
    # drop triangles outside the band cells (concavities of the band)
    cen = P[tri].mean(axis=1)
    cell_of = np.floor(cen / eps).astype(np.int64)
    inside = np.array([tuple(c) in band_set for c in cell_of])
    return P, tri[inside]


def build_epsilon_problem(geom: CellGeometry, defect: DefectSpec | None, policy: BoundaryInclusionPolicy,
                          eps, R_max, cells_per_inclusion=CELLS_PER_INCLUSION,
                          cell_mesh: SimplicialMesh | None = None) -> EpsilonProblem:
    """Assemble the fine-scale forms at scale ``eps``.

    ``defect=None`` gives the unperturbed periodic medium.  The truncation
    is the smallest union of whole cells containing ``|x| <= R_max``.
    """
    k = epsilon_index(eps)
    eps = 1.0 / k
    if defect is not None and not isinstance(defect.shape, DefectBall):
        raise ConfigError("defect.shape", "fine-scale runs support disk defects only")
    cm = cell_mesh if cell_mesh is not None else cell_mesh_for(geom, cells_per_inclusion)
    rho = geom.inclusion.radius
    R = defect.shape.radius if defect is not None else -1.0
    N = int(math.ceil(R_max / eps - 1e-9))
    if defect is not None and N * eps < R + 2 * eps:
        raise ConfigError("validation.R_max", "truncation must leave at least two cells around the defect")
    ii, jj = np.meshgrid(np.arange(-N, N), np.arange(-N, N), indexing="ij")
    idx = np.column_stack([ii.ravel(), jj.ravel()])
    lo = idx * eps
    hi = (idx + 1) * eps
    nearest = np.clip(0.0, lo, hi)
    dmin = np.linalg.norm(nearest, axis=1)
    far = np.maximum(np.abs(lo), np.abs(hi))
    dmax = np.linalg.norm(far, axis=1)
    tol = 1e-12 * max(R, 1.0)
    if defect is None:
        band = np.zeros(len(idx), bool)
        inner = np.zeros(len(idx), bool)
    else:
        band = (dmin <= R + tol) & (dmax >= R - tol)
        inner = dmax < R - tol
    regular = ~band
    # tiled copies
    reg = idx[regular]
    npc = cm.n_points
    pts = ((cm.points[None, :, :] + reg[:, None, :].astype(float)) * eps).reshape(-1, 2)
    cells = (cm.cells[None, :, :] + (np.arange(len(reg)) * npc)[:, None, None]).reshape(-1, 3)
    tags = np.tile(cm.cell_tags, len(reg))
    tags[np.repeat(inner[regular], cm.n_cells)] = int(PhaseLabel.DEFECT)
    P_all, C_all, T_all = [pts], [cells], [tags]
    n_band = int(band.sum())
    if n_band:
        bottom = cm.points[(cm.points[:, 1] == 0.0)]
        side = np.sort(bottom[:, 0])
        h = eps * 2 * rho / cells_per_inclusion
        inc_circ = cm.nodes_with_marker(2)
        inc_spacing = 2 * math.pi * rho * eps / max(8, len(inc_circ))
        hole = np.zeros((1, 2)) if inner.any() else None
        Pb, Cb = _band_mesh(idx[band], side, eps, rho, R, h, inc_spacing, hole)
        cen = Pb[Cb].mean(axis=1)
        Tb = classify_points(geom, defect, eps, cen)
        P_all.append(Pb)
        C_all.append(Cb + len(pts))
        T_all.append(Tb)
    P = np.vstack(P_all)
    C = np.vstack(C_all)
    T = np.concatenate(T_all)
    P, C = merge_vertices(P, C, scale=eps, decimals=9)
    mesh = SimplicialMesh(P, C, T)
    coef = coefficient_from_labels(T, geom, defect if defect is not None else DefectSpec(DefectBall(1.0)),
                                   policy, eps)
    K = assemble(mesh, coef, "stiffness").matrix
    M = assemble(mesh, 1.0, "mass").matrix
    Cn = dirichlet_elimination(mesh.n_points, mesh.boundary_nodes())
    return EpsilonProblem(eps, geom, defect, policy, float(R_max), cells_per_inclusion, mesh, coef,
                          Cn.reduce(K), Cn.reduce(M), Cn, N * eps, n_band)


# --- eigenpairs near lambda0 ----------------------------------------------------

@dataclass
class WindowSolution:
    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)  # full nodal vectors, M-orthonormal
    window: tuple = (0.0, 0.0)
    clipped: bool = False


def solve_near(problem: EpsilonProblem, lam0, c, k_max_eigs=6) -> WindowSolution:
    """Eigenpairs of the fine-scale problem with eigenvalues in ``(lam0 - c, lam0 + c)``."""
    sel, clipped = eig_in_window(problem.K, problem.M, lam0, c, k_max_eigs)
    if clipped:
        warnings.warn(f"window around {lam0} may hold more than {k_max_eigs} eigenvalues", stacklevel=2)
    sel.sort(key=lambda p: p.eigenvalue)
    vals = np.array([p.eigenvalue for p in sel])
    vecs = np.column_stack([problem.constraint.expand(p.eigenvector) for p in sel]) if sel else \
        np.zeros((problem.mesh.n_points, 0))
    return WindowSolution(vals, vecs, (lam0 - c, lam0 + c), clipped)


# --- two-scale approximation ----------------------------------------------------

def build_approximation(mode_field: ModeField, problem: EpsilonProblem):
    """Nodal ``u0(x) + u0(x) V(x/eps)`` on inclusion elements, ``u0`` elsewhere.

    Returns the raw nodal field and its copy normalized in the mass norm.
    """
    mesh = problem.mesh
    x = mesh.points
    u0 = mode_field.u0(x)
    in_inc = np.zeros(mesh.n_points, bool)
    in_inc[np.unique(mesh.cells[mesh.cell_tags == int(PhaseLabel.INCLUSION)])] = True
    # vertices shared with other phases lie on an inclusion boundary where V vanishes
    other = np.zeros(mesh.n_points, bool)
    other[np.unique(mesh.cells[mesh.cell_tags != int(PhaseLabel.INCLUSION)])] = True
    interior = in_inc & ~other
    U = u0.copy()
    U[interior] += u0[interior] * mode_field.V(x[interior] / problem.eps)
    xr = problem.constraint.prolong.T @ U
    norm = math.sqrt(float(xr @ (problem.M @ xr)))
    return U, U / norm


def projection_distance(problem: EpsilonProblem, U_normalized, vectors) -> float:
    """Mass-norm distance from ``U`` to the span of M-orthonormal ``vectors``."""
    P = problem.constraint.prolong
    u = P.T @ U_normalized
    if vectors.shape[1] == 0:
        return 1.0
    V = P.T @ vectors
    coef = V.T @ (problem.M @ u)
    r = u - V @ coef
    return math.sqrt(max(0.0, float(r @ (problem.M @ r))))


# --- convergence study ----------------------------------------------------------

@dataclass
class CaseRecord:
    eps: float
    eigenvalues: list
    error: float | None
    distance: float | None
    J_count: int
    n_dofs: int
    clipped: bool = False
    note: str = ""


@dataclass
class ConvergenceReport:
    lam0: float
    window: float
    mode: dict
    cases: list
    slopes: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lam0,
            "window": self.window,
            "mode": self.mode,
            "cases": [
                {"eps": c.eps, "eigs": c.eigenvalues, "err": c.error, "d": c.distance, "J_count": c.J_count,
                 "n_dofs": c.n_dofs, "clipped": c.clipped, "note": c.note}
                for c in self.cases
            ],
            "slopes": self.slopes,
            "extras": self.extras,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["eps", "J_count", "err", "d", "n_dofs", "eigenvalues"])
            for c in self.cases:
                w.writerow([repr(c.eps), c.J_count, repr(c.error), repr(c.distance), c.n_dofs,
                            " ".join(repr(v) for v in c.eigenvalues)])


def fit_slope(eps, values):
    """Least-squares slope of log(values) against log(eps) and the two-point slope of the last pair."""
    e = np.asarray(eps, float)
    v = np.asarray(values, float)
    ok = np.isfinite(v) & (v > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan")
    ls = float(np.polyfit(np.log(e[ok]), np.log(v[ok]), 1)[0])
    e2, v2 = e[ok][-2:], v[ok][-2:]
    two = float(np.log(v2[1] / v2[0]) / np.log(e2[1] / e2[0]))
    return ls, two


@dataclass
class Reference:
    """Limit problem solved with the cell discretization used at fine scale."""

    mode: LocalizedMode
    neighbours: list
    gap: tuple
    a_hom: float
    cell_mesh: SimplicialMesh = field(repr=False)

    def default_window(self, fraction=0.5) -> float:
        """``fraction`` of the distance to the nearest gap edge or other mode."""
        lam = self.mode.eigenvalue
        dist = [lam - self.gap[0], self.gap[1] - lam]
        dist += [abs(m.eigenvalue - lam) for m in self.neighbours if abs(m.eigenvalue - lam) > 1e-9 * lam]
        return fraction * min(dist)


def discrete_reference(mode: LocalizedMode, geom: CellGeometry, defect: DefectSpec,
                       cells_per_inclusion=CELLS_PER_INCLUSION, orders=range(6)) -> Reference:
    """Radial mode of the same order with A_hom and beta from the fine-scale cell mesh.

    The fine-scale eigenvalues converge to this value as eps -> 0 at fixed
    cell resolution, so errors measured against it isolate the eps-dependence.
    """
    from hicontrast.beta import find_gaps
    from hicontrast.defect import RadialParams, find_radial_modes
    from hicontrast.homogenize import homogenized_tensor

    if not isinstance(defect.shape, DefectBall):
        raise ConfigError("defect.shape", "the discrete reference needs a ball defect")
    cm = cell_mesh_for(geom, cells_per_inclusion)
    a_hom = homogenized_tensor(cm, geom.a1).scalar
    beta = BetaEvaluator.direct(cm, geom.a0, 20)
    gaps = find_gaps(beta, 3.0 * float(beta.poles[-1]) if len(beta.poles) else 1e3)
    lam = mode.eigenvalue
    gap = min(gaps, key=lambda g: 0.0 if g.contains(lam) else min(abs(g.lower - lam), abs(g.upper - lam)))
    params = RadialParams(2, defect.a2, a_hom, defect.shape.radius, beta)
    found = find_radial_modes(params, (gap.lower, gap.upper), list(orders))
    same = [m for m in found if m.m == mode.m]
    if not same:
        raise ConvergenceError(f"no discrete counterpart of the m={mode.m} mode in ({gap.lower}, {gap.upper})")
    ref = min(same, key=lambda m: abs(m.eigenvalue - lam))
    return Reference(ref, [m for m in found if m is not ref], (gap.lower, gap.upper), a_hom, cm)


def _run_case(field_, geom, defect, policy, eps, R_max, cpi, cm, lam_ref, c, k_max_eigs):
    prob = build_epsilon_problem(geom, defect, policy, eps, R_max, cpi, cm)
    sol = solve_near(prob, lam_ref, c, k_max_eigs)
    if len(sol.eigenvalues) == 0:
        return CaseRecord(eps, [], None, None, 0, prob.n_dofs, sol.clipped, "empty window"), None
    k = int(np.argmin(np.abs(sol.eigenvalues - lam_ref)))
    _, Un = build_approximation(field_, prob)
    d = projection_distance(prob, Un, sol.vectors)
    rec = CaseRecord(eps, sol.eigenvalues.tolist(), float(abs(sol.eigenvalues[k] - lam_ref)), d,
                     len(sol.eigenvalues), prob.n_dofs, sol.clipped)
    return rec, float(sol.eigenvalues[k])


def convergence_study(mode: LocalizedMode, geom: CellGeometry, defect: DefectSpec,
                      policy: BoundaryInclusionPolicy, eps_list, c=None, R_max=None,
                      cells_per_inclusion=CELLS_PER_INCLUSION, k_max_eigs=6, window_fraction=0.5,
                      reference="discrete", subordination_eps=None, log=None) -> ConvergenceReport:
    """Eigenvalue and eigenfunction errors along ``eps_list`` (strictly decreasing).

    ``reference="discrete"`` measures errors against the limit eigenvalue
    recomputed with the cell discretization (:func:`discrete_reference`);
    ``"limit"`` uses ``mode.eigenvalue``.  The error against ``mode`` is
    always reported in ``extras``.  ``c`` defaults to
    :meth:`Reference.default_window`, ``R_max`` to ``R + 6/kappa``.  If
    ``subordination_eps`` is set, that case is repeated with twice the cell
    resolution and the change of the error is reported.
    """
    eps_list = [1.0 / epsilon_index(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("validation.eps_list", "must be strictly decreasing")
    if reference not in ("discrete", "limit"):
        raise ConfigError("validation.reference", f"unknown reference {reference!r}")
    say = log or (lambda msg: None)
    cpi = cells_per_inclusion
    ref = discrete_reference(mode, geom, defect, cpi)
    lam_ref = ref.mode.eigenvalue if reference == "discrete" else mode.eigenvalue
    used = ref.mode if reference == "discrete" else mode
    c = ref.default_window(window_fraction) if c is None else float(c)
    if R_max is None:
        R_max = defect.shape.radius + 6.0 / used.kappa
    field_ = assemble_mode_field(used, ref.cell_mesh, geom.a0, defect=defect)
    say(f"reference lambda0 = {lam_ref:.10g} (limit {mode.eigenvalue:.10g}), window {c:.4g}, R_max {R_max:.4g}")
    cases, nearest = [], {}
    for eps in eps_list:
        rec, lam = _run_case(field_, geom, defect, policy, eps, R_max, cpi, ref.cell_mesh, lam_ref, c,
                             k_max_eigs)
        cases.append(rec)
        nearest[eps] = lam
        say(f"eps=1/{round(1 / eps)} dofs={rec.n_dofs} eigs={rec.eigenvalues} err={rec.error} d={rec.distance}")
    ok = [c_ for c_ in cases if c_.error is not None]
    eig_ls, eig_two = fit_slope([c_.eps for c_ in ok], [c_.error for c_ in ok])
    fn_ls, fn_two = fit_slope([c_.eps for c_ in ok], [c_.distance for c_ in ok])
    extras = {
        "reference": reference,
        "lambda0_limit": mode.eigenvalue,
        "lambda0_reference": lam_ref,
        "a_hom_reference": ref.a_hom,
        "R_max": R_max,
        "cells_per_inclusion": cpi,
        "err_vs_limit": [None if nearest[e] is None else abs(nearest[e] - mode.eigenvalue) for e in eps_list],
    }
    if subordination_eps is not None:
        extras["subordination"] = subordination_check(mode, geom, defect, policy, subordination_eps, c, R_max,
                                                      cpi, k_max_eigs, nearest.get(1.0 / epsilon_index(
                                                          subordination_eps)), lam_ref, say)
    return ConvergenceReport(
        lam_ref, c, {"m": mode.m, "multiplicity": mode.multiplicity, "kappa": used.kappa},
        cases, {"eig": eig_ls, "eig_two_point": eig_two, "fn": fn_ls, "fn_two_point": fn_two}, extras,
    )


def subordination_check(mode, geom, defect, policy, eps, c, R_max, cells_per_inclusion, k_max_eigs=6,
                        lam_coarse=None, lam_ref_coarse=None, log=None) -> dict:
    """Repeat one eps case with twice the cell resolution.

    Each resolution is compared with its own discrete reference; ``ratio`` is
    the change of the signed error relative to the coarse error.  The raw
    change of the eigenvalue is reported as ``raw_change``.
    """
    say = log or (lambda msg: None)
    eps = 1.0 / epsilon_index(eps)
    cpi = cells_per_inclusion
    if lam_coarse is None or lam_ref_coarse is None:
        ref = discrete_reference(mode, geom, defect, cpi)
        f = assemble_mode_field(ref.mode, ref.cell_mesh, geom.a0, defect=defect)
        _, lam_coarse = _run_case(f, geom, defect, policy, eps, R_max, cpi, ref.cell_mesh, ref.mode.eigenvalue,
                                  c, k_max_eigs)
        lam_ref_coarse = ref.mode.eigenvalue
    fine = discrete_reference(mode, geom, defect, 2 * cpi)
    f = assemble_mode_field(fine.mode, fine.cell_mesh, geom.a0, defect=defect)
    rec, lam_fine = _run_case(f, geom, defect, policy, eps, R_max, 2 * cpi, fine.cell_mesh, fine.mode.eigenvalue,
                              c, k_max_eigs)
    if lam_coarse is None or lam_fine is None:
        return {"eps": eps, "ok": False, "note": "empty window"}
    e1 = lam_coarse - lam_ref_coarse
    e2 = lam_fine - fine.mode.eigenvalue
    out = {
        "eps": eps,
        "cells_per_inclusion": [cpi, 2 * cpi],
        "lambda": [lam_coarse, lam_fine],
        "lambda0_reference": [lam_ref_coarse, fine.mode.eigenvalue],
        "signed_error": [e1, e2],
        "ratio": abs(e2 - e1) / abs(e1),
        "raw_change": abs(lam_fine - lam_coarse),
        "raw_ratio_vs_limit": abs(lam_fine - lam_coarse) / abs(lam_coarse - mode.eigenvalue),
        "n_dofs": rec.n_dofs,
    }
    out["ok"] = out["ratio"] < 0.2
    say(f"subordination at eps=1/{round(1 / eps)}: {out}")
    return out
