"""Subcommand stages.

Each stage reads what it needs from the :class:`Context` (computing missing
upstream results on demand), stores its own result there and writes its
reports.  ``pipeline`` runs the stages in order on one context.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hicontrast.beta import BetaEvaluator, find_gaps
from hicontrast.config import RunConfig
from hicontrast.errors import ConfigError, PoleProximityError
from hicontrast.fem.radial import RadialMesh
from hicontrast.geometry import Ball, DefectBall
from hicontrast.inclusion import InclusionSpectrum, ball_spectrum, fem_spectrum

PIPELINE = ("inclusion-spectrum", "beta", "gaps", "homogenize", "defect-modes", "validate-eps")


def pipeline_stages(cfg: RunConfig) -> tuple:
    """Stages chained by ``pipeline``; the fine-scale study is 2D only and is skipped otherwise."""
    if cfg.geometry.dimension != 2:
        return PIPELINE[:-1]
    return PIPELINE


@dataclass
class Context:
    cfg: RunConfig
    run_dir: Path
    log: object = print
    results: dict = field(default_factory=dict)

    def __post_init__(self):
        self.run_dir = Path(self.run_dir)
        (self.run_dir / "config.yaml").write_text(self.cfg.dump())

    @property
    def header(self) -> dict:
        return {"config": self.cfg.to_dict(), "config_hash": self.cfg.content_hash()}

    def wants(self, fmt) -> bool:
        return fmt in self.cfg.output.formats

    def write_json(self, name, payload) -> None:
        if self.wants("json"):
            doc = {**self.header, **payload}
            (self.run_dir / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name, header, rows) -> None:
        if not self.wants("csv"):
            return
        buf = io.StringIO()
        buf.write(f"# config_hash: {self.cfg.content_hash()}\n")
        buf.write(f"# config: {json.dumps(self.cfg.to_dict(), sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        (self.run_dir / name).write_text(buf.getvalue())

    def get(self, key):
        if key not in self.results:
            STAGES[_PRODUCER[key]](self)
        return self.results[key]


# --- builders ------------------------------------------------------------------

def _ball(cfg: RunConfig, need=""):
    inc = cfg.cell_geometry().inclusion
    if not isinstance(inc, Ball):
        raise ConfigError("geometry.inclusion.shape", f"{need} needs a ball inclusion")
    return inc


def inclusion_mesh(cfg: RunConfig):
    """Mesh used for the inclusion problem (radial for balls)."""
    geom = cfg.cell_geometry()
    b = cfg.beta
    if isinstance(geom.inclusion, Ball):
        return RadialMesh(geom.inclusion.radius, b.radial_elements, geom.dimension)
    from hicontrast.fem.meshing import polygon_mesh

    v = np.asarray(geom.inclusion.vertices, float)
    h = b.inclusion_h or float(np.max(np.linalg.norm(v - v.mean(axis=0), axis=1))) / 40
    return polygon_mesh(v, h)


def build_spectrum(cfg: RunConfig) -> InclusionSpectrum:
    b = cfg.beta
    geom = cfg.cell_geometry()
    if b.spectrum == "synthetic":
        return InclusionSpectrum.synthetic(b.synthetic.eigenvalues, b.synthetic.squared_means, geom.a0)
    if b.spectrum == "ball":
        inc = _ball(cfg, "beta.spectrum=ball")
        return ball_spectrum(inc.radius, geom.a0, geom.dimension, b.k_max, center=inc.center)
    return fem_spectrum(inclusion_mesh(cfg), geom.a0, b.k_max, b.mean_tol, b.degeneracy_tol)


def build_beta(cfg: RunConfig, spectrum: InclusionSpectrum) -> BetaEvaluator:
    b = cfg.beta
    geom = cfg.cell_geometry()
    kw = {"guard": b.pole_guard, "tail_tol": b.tail_tol}
    if b.method == "series":
        return BetaEvaluator.series(spectrum, **kw)
    if b.spectrum == "synthetic":
        raise ConfigError("beta.method", "a synthetic spectrum supports the series method only")
    if b.method == "direct":
        return BetaEvaluator.direct(inclusion_mesh(cfg), geom.a0, b.k_max, **kw)
    inc = _ball(cfg, "beta.method=explicit")
    return BetaEvaluator.explicit_ball(inc.radius, geom.a0, geom.dimension, b.k_max, **kw)


def default_lambda_max(evaluator) -> float:
    poles = list(evaluator.poles)
    return 3.0 * poles[0] if poles else 100.0


# --- stages --------------------------------------------------------------------

def stage_spectrum(ctx: Context) -> None:
    spec = build_spectrum(ctx.cfg)
    ctx.results["spectrum"] = spec
    rows = [(i, e.eigenvalue, e.mean, e.multiplicity, int(e.zero_mean)) for i, e in enumerate(spec.entries, 1)]
    ctx.write_csv("inclusion_spectrum.csv", ["index", "eigenvalue", "mean", "multiplicity", "zero_mean_flag"], rows)
    ctx.write_json("inclusion_spectrum.json", {
        "ordering": spec.ordering, "a0": spec.a0, "k_max": spec.k_max,
        "entries": [{"eigenvalue": e.eigenvalue, "mean": e.mean, "multiplicity": e.multiplicity,
                     "zero_mean": e.zero_mean} for e in spec.entries],
    })
    ctx.log(f"inclusion-spectrum: {len(spec.entries)} entries, first {spec.entries[0].eigenvalue:.6g}")


def stage_beta(ctx: Context) -> None:
    cfg = ctx.cfg
    ev = build_beta(cfg, ctx.get("spectrum"))
    ctx.results["beta"] = ev
    b = cfg.beta
    hi = b.lambda_max or cfg.gaps.lambda_max or default_lambda_max(ev)
    lams = np.linspace(b.lambda_min, hi, b.samples)
    rows, skipped = [], 0
    for lam in lams:
        try:
            rows.append((float(lam), float(ev(lam)), ev.method, float(ev.tail_bound(lam))))
        except PoleProximityError:
            skipped += 1
        except ValueError:
            skipped += 1  # series tail above tolerance
    ctx.write_csv("beta.csv", ["lambda", "beta", "method", "tail_bound"], rows)
    ctx.log(f"beta: {len(rows)} samples ({skipped} skipped near poles or by the tail check)")


def stage_gaps(ctx: Context) -> None:
    cfg = ctx.cfg
    ev = ctx.get("beta")
    lam_max = cfg.gaps.lambda_max or default_lambda_max(ev)
    table = find_gaps(ev, lam_max, cfg.gaps.gap_tol, cfg.gaps.samples)
    ctx.results["gaps"] = table
    rows = [(i, g.lower, g.upper, g.lower_kind, g.upper_kind, g.midpoint_beta) for i, g in enumerate(table, 1)]
    ctx.write_csv("gaps.csv", ["index", "lower", "upper", "lower_kind", "upper_kind", "midpoint_beta"], rows)
    ctx.write_json("gaps.json", table.to_dict())
    ctx.log(f"gaps: {[(round(g.lower, 6), round(g.upper, 6)) for g in table]}")


def _cell_mesh(cfg: RunConfig, h):
    geom = cfg.cell_geometry()
    inc = geom.inclusion
    if geom.dimension == 3:
        from hicontrast.fem.meshing import periodic_cube_mesh

        return periodic_cube_mesh(inc.radius, max(2, int(round(1.0 / h))), inc.center)
    if isinstance(inc, Ball):
        from hicontrast.fem.meshing import periodic_cell_mesh

        return periodic_cell_mesh(inc.radius, h, inc.center)
    from hicontrast.fem.meshing import periodic_polygon_cell_mesh

    return periodic_polygon_cell_mesh(inc.vertices, h)


def stage_homogenize(ctx: Context) -> None:
    from hicontrast.homogenize import HomogenizedTensor, homogenized_tensor, richardson

    cfg = ctx.cfg
    geom = cfg.cell_geometry()
    extra = {}
    if cfg.homogenize.a_hom is not None:
        if not cfg.homogenize.a_hom > 0:
            raise ConfigError("homogenize.a_hom", "must be positive")
        n = geom.dimension
        hom = HomogenizedTensor(cfg.homogenize.a_hom * np.eye(n), geom.matrix_volume, np.zeros((0, n)))
        extra["source"] = "config"
    else:
        h0 = cfg.geometry.mesh_h or (1 / 64 if geom.dimension == 2 else 1 / 16)
        hs = [h0 / 2**k for k in range(cfg.homogenize.levels)]
        tensors = [homogenized_tensor(_cell_mesh(cfg, h), geom.a1) for h in hs]
        hom = tensors[-1]
        extra["source"] = "cell problem"
        extra["levels"] = [{"h": h, "scalar": t.scalar} for h, t in zip(hs, tensors)]
        if len(tensors) >= 2:
            extra["richardson"] = richardson([t.scalar for t in tensors], hs)
    ctx.results["hom"] = hom
    ctx.write_json("homogenized.json", {**hom.to_dict(), **extra})
    ctx.log(f"homogenize: A = {np.round(hom.A, 8).tolist()}")


def _selected_gaps(ctx: Context):
    table = ctx.get("gaps")
    idx = ctx.cfg.modes.gap_index
    if idx is None:
        return list(enumerate(table, 1))
    if not 1 <= idx <= len(table):
        raise ConfigError("modes.gap_index", f"{idx} outside 1..{len(table)}")
    return [(idx, table[idx - 1])]


def _fem_modes(ctx, gap, hom, ev):
    from hicontrast.defect import default_truncation, general_defect_modes
    from hicontrast.fem.meshing import defect_disk_mesh, polygon_defect_mesh

    cfg = ctx.cfg
    if cfg.geometry.dimension != 2:
        raise ConfigError("modes.method", "the FEM defect solver is 2D only")
    defect = cfg.defect_spec()
    if isinstance(defect.shape, DefectBall):
        R = defect.shape.radius
    else:
        R = float(np.max(np.linalg.norm(np.asarray(defect.shape.vertices, float), axis=1)))
    R_max, _ = default_truncation(R, hom.scalar, ev, (gap.lower, gap.upper))
    R_max = R + (R_max - R) * cfg.modes.kappa_rmax / 6.0
    h = cfg.modes.fem_h or R / 60
    if isinstance(defect.shape, DefectBall):
        mesh = defect_disk_mesh(R, R_max, h)
    else:
        mesh = polygon_defect_mesh(defect.shape.vertices, R_max, h)
    return general_defect_modes(mesh, hom, defect.a2, ev, (gap.lower, gap.upper), R_max, cfg.modes.k_window,
                                cfg.modes.n_scan, defect_radius=R if isinstance(defect.shape, DefectBall) else None)


def stage_modes(ctx: Context) -> None:
    from hicontrast.beta import solve_V
    from hicontrast.defect import RadialParams, find_radial_modes

    cfg = ctx.cfg
    ev, hom = ctx.get("beta"), ctx.get("hom")
    defect = cfg.defect_spec()
    found = []
    for gi, gap in _selected_gaps(ctx):
        if cfg.modes.method == "radial":
            if not isinstance(defect.shape, DefectBall):
                raise ConfigError("modes.method", "radial matching needs a ball defect")
            if hom.anisotropy > 1e-3 * hom.scalar:
                ctx.log(f"defect-modes: A_hom anisotropy {hom.anisotropy:.2e}; using its isotropic part")
            params = RadialParams(cfg.geometry.dimension, defect.a2, hom.scalar, defect.shape.radius, ev)
            modes = find_radial_modes(params, (gap.lower, gap.upper), cfg.m_values(), cfg.modes.n_grid,
                                      cfg.modes.tol)
        else:
            modes = _fem_modes(ctx, gap, hom, ev)
        found.extend((gi, m) for m in modes)
    ctx.results["modes"] = found
    table = []
    for gi, m in found:
        d = m.to_dict()
        d["gap_index"] = gi
        if m.method == "radial":
            d["decay_rate_fit"] = m.decay_rate_fit()
        table.append(d)
    ctx.write_json("modes.json", {"modes": table})
    # radial profiles along the positive first axis
    prof = []
    for k, (gi, m) in enumerate(found, 1):
        R = m.params.R if m.params else 1.0
        for r in np.linspace(0.0, R + 6.0 / m.kappa, 121):
            x = np.zeros((1, cfg.geometry.dimension))
            x[0, 0] = r
            prof.append((k, gi, float(r), float(m.u0(x)[0])))
    ctx.write_csv("mode_profiles.csv", ["mode", "gap", "r", "u0"], prof)
    # microscopic profiles V at each eigenvalue
    rows = []
    mesh = inclusion_mesh(cfg)
    for k, (gi, m) in enumerate(found, 1):
        sol = solve_V(mesh, cfg.geometry.a0, m.eigenvalue)
        if isinstance(mesh, RadialMesh):
            for r, v in zip(mesh.nodes, sol.values):
                rows.append((k, float(r), float(v)))
        else:
            c = mesh.points.mean(axis=0)
            dist = np.linalg.norm(mesh.points - c, axis=1)
            for i in np.argsort(dist, kind="stable"):
                rows.append((k, float(dist[i]), float(sol.values[i])))
    ctx.write_csv("V_samples.csv", ["mode", "r", "V"], rows)
    ctx.log(f"defect-modes: {[(gi, m.m, round(m.eigenvalue, 8)) for gi, m in found]}")


def stage_validate(ctx: Context) -> None:
    from hicontrast.epsilon import convergence_study

    cfg = ctx.cfg
    geom = cfg.cell_geometry()
    if geom.dimension != 2:
        raise ConfigError("geometry.dimension", "fine-scale validation is 2D only")
    found = ctx.get("modes")
    radial = [m for _, m in found if m.method == "radial"]
    v = cfg.validation
    if not radial:
        raise ConfigError("validation.mode_index", "no radial mode available to validate")
    if v.mode_m is not None:
        same = [m for m in radial if m.m == v.mode_m]
        if not same:
            raise ConfigError("validation.mode_m", f"no radial mode of order {v.mode_m} found")
        mode = same[0]
    elif 0 <= v.mode_index < len(radial):
        mode = radial[v.mode_index]
    else:
        raise ConfigError("validation.mode_index", f"{v.mode_index} outside 0..{len(radial) - 1}")
    report = convergence_study(
        mode, geom, cfg.defect_spec(), cfg.policy(), list(v.eps_list), c=v.window, R_max=v.R_max,
        cells_per_inclusion=v.cells_per_inclusion, k_max_eigs=v.k_max_eigs, window_fraction=v.window_fraction,
        reference=v.reference, subordination_eps=v.subordination_eps, log=ctx.log,
    )
    ctx.results["convergence"] = report
    ctx.write_json("convergence.json", report.to_dict())
    rows = [(c.eps, c.J_count, c.error, c.distance, c.n_dofs, " ".join(repr(x) for x in c.eigenvalues))
            for c in report.cases]
    ctx.write_csv("convergence.csv", ["eps", "J_count", "err", "d", "n_dofs", "eigenvalues"], rows)
    ctx.log(f"validate-eps: slopes {report.slopes}")


STAGES = {
    "inclusion-spectrum": stage_spectrum,
    "beta": stage_beta,
    "gaps": stage_gaps,
    "homogenize": stage_homogenize,
    "defect-modes": stage_modes,
    "validate-eps": stage_validate,
}
_PRODUCER = {"spectrum": "inclusion-spectrum", "beta": "beta", "gaps": "gaps", "hom": "homogenize",
             "modes": "defect-modes", "convergence": "validate-eps"}
