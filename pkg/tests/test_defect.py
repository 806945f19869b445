import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from hicontrast.beta import BetaEvaluator, find_gaps
from hicontrast.defect import (
    AngularIndex,
    RadialParams,
    assemble_mode_field,
    build_pencil,
    default_truncation,
    find_radial_modes,
    general_defect_modes,
    radial_dispersion,
    radsymm_factor,
    radsymm_residual,
)
from hicontrast.errors import ConfigError, OutOfGapError
from hicontrast.fem.meshing import defect_disk_mesh
from hicontrast.fem.radial import RadialMesh
from hicontrast.geometry import DefectBall, DefectSpec

A_HOM_2D = 0.5584879  # disk rho = 0.3, extrapolated cell problem
A_HOM_3D = 0.839

B3 = BetaEvaluator.explicit_ball(0.3, 1.0, 3)
G3 = find_gaps(B3, 3 * B3.poles[2])
B2 = BetaEvaluator.explicit_ball(0.3, 1.0, 2)
G2 = find_gaps(B2, 150.0)


def _p3(R=0.5, a2=1.0):
    return RadialParams(3, a2, A_HOM_3D, R, B3)


def _p2(R=0.5, a2=1.0):
    return RadialParams(2, a2, A_HOM_2D, R, B2)


def test_angular_index():
    assert AngularIndex(2, 0).multiplicity == 1
    assert AngularIndex(2, 3).multiplicity == 2
    assert AngularIndex(3, 0.5).multiplicity == 1
    assert AngularIndex(3, 2.5).multiplicity == 5
    with pytest.raises(ConfigError):
        AngularIndex(3, 1)
    with pytest.raises(ConfigError):
        AngularIndex(2, 0.5)


def test_params_validation():
    with pytest.raises(ConfigError):
        RadialParams(2, -1.0, 1.0, 0.5, B2)
    with pytest.raises(ConfigError):
        RadialParams(4, 1.0, 1.0, 0.5, B2)


def test_out_of_gap():
    with pytest.raises(OutOfGapError):
        radial_dispersion(50.0, 0, _p2())


@pytest.mark.parametrize("a2", [0.5, 1.0, 2.0])
def test_radsymm_is_scaled_determinant(a2):
    p = _p3(0.5, a2)
    g = G3[0]
    for lam in np.linspace(g.lower, g.upper, 23)[1:-1]:
        try:
            r = radsymm_residual(lam, p)
        except OutOfGapError:
            continue
        d = radial_dispersion(lam, 0.5, p) * radsymm_factor(lam, p)
        assert abs(r - d) < 1e-10 * max(1.0, abs(r))


@pytest.mark.parametrize("R", [0.3, 0.5, 0.8, 1.3])
def test_trigonometric_roots_match_determinant(R):
    p = _p3(R)
    for g in G3:
        modes = [m for m in find_radial_modes(p, g, [0.5])]
        lams = g.lower + (g.upper - g.lower) * np.arange(1, 401) / 401
        vals = []
        for lam in lams:
            try:
                vals.append(radsymm_residual(lam, p))
            except OutOfGapError:
                vals.append(np.nan)
        roots = []
        for i in range(len(lams) - 1):
            a, b = vals[i], vals[i + 1]
            if np.isfinite(a) and np.isfinite(b) and a * b < 0 and abs(a - b) < 50:
                roots.append(brentq(radsymm_residual, lams[i], lams[i + 1], args=(p,), xtol=1e-13))
        assert len(roots) == len(modes)
        for r, m in zip(roots, modes):
            assert abs(r - m.eigenvalue) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(20.0, 400.0), st.floats(0.2, 3.0), st.floats(0.3, 3.0))
def test_radsymm_scaling(lam, R, c):
    a = 0.8

    def head(lam_, R_):
        k = math.sqrt(lam_ / a)
        return 1.0 / math.tan(k * R_) + (a - a) / (math.sqrt(lam_ * a) * R_)

    if abs(math.sin(math.sqrt(lam / a) * R)) < 1e-3:
        return
    assert head(lam, R) == pytest.approx(head(lam * c * c, R / c), rel=1e-9, abs=1e-9)


def test_sign_change_over_one_period():
    g = G3[0]
    lam = 0.5 * (g.lower + g.upper)
    k = math.sqrt(lam / 1.0)
    Rs = np.linspace(1.0, 1.0 + math.pi / k, 200)
    vals = np.array([radsymm_residual(lam, _p3(R)) for R in Rs])
    assert np.any(np.diff(np.sign(vals)) > 0) or np.any(np.diff(np.sign(vals)) < 0)


@pytest.mark.parametrize("params,m_list", [(_p2(), [0, 1, 2, 3]), (_p3(0.8, 2.0), [0.5, 1.5, 2.5, 3.5])])
def test_modes_satisfy_interface_conditions(params, m_list):
    gaps = G2 if params.n == 2 else G3
    found = []
    for g in gaps:
        found += find_radial_modes(params, g, m_list)
    assert found
    for m in found:
        assert m.residuals["continuity"] < 1e-10
        assert m.residuals["flux"] < 1e-10
        assert m.beta_value < 0
        assert m.multiplicity == AngularIndex(params.n, m.m).multiplicity


def test_known_2d_modes():
    modes = find_radial_modes(_p2(), G2[0], [0, 1, 2, 3])
    lam = {m.m: m.eigenvalue for m in modes}
    assert lam[2] == pytest.approx(70.4902, abs=2e-3)
    assert lam[0] == pytest.approx(74.94467, abs=2e-4)


def test_grid_refinement_keeps_root_count():
    for g in G2:
        coarse = find_radial_modes(_p2(), g, [0, 1, 2, 3], n_grid=400)
        fine = find_radial_modes(_p2(), g, [0, 1, 2, 3], n_grid=4000)
        assert len(coarse) == len(fine)
        for a, b in zip(coarse, fine):
            assert a.eigenvalue == pytest.approx(b.eigenvalue, abs=1e-9)


def test_no_modes_outside_gap():
    # an interval straddling a band: beta >= 0 points are skipped
    lo = G2[0].lower
    modes = find_radial_modes(_p2(), (lo, 300.0), [0, 1, 2])
    for m in modes:
        assert B2(m.eigenvalue) < 0


def test_decay_rate_fit():
    for m in find_radial_modes(_p2(), G2[0], [0, 2]) + find_radial_modes(_p3(), G3[0], [0.5, 2.5]):
        assert m.decay_rate_fit() == pytest.approx(m.kappa, rel=1e-2)
        assert m.kappa == pytest.approx(math.sqrt(-m.beta_value / m.params.a_hom), rel=1e-14)


def test_mode_field():
    mode = find_radial_modes(_p3(), G3[0], [0.5])[0]
    mesh = RadialMesh(0.3, 200, 3)
    f = assemble_mode_field(mode, mesh, 1.0, defect=DefectSpec(DefectBall(0.5), 1.0),
                            inclusion_center=np.full(3, 0.5))
    assert abs(f.V_values[-1]) < 1e-12
    x_in = np.array([[0.1, 0.2, 0.0], [0.3, 0.0, 0.1]])
    assert np.all(f.v(x_in, np.full((2, 3), 0.5)) == 0.0)
    x_out = np.array([[1.0, 0.2, 0.0]])
    assert f.v(x_out, np.full((1, 3), 0.5))[0] != 0.0
    assert f.V(np.array([[0.0, 0.0, 0.0]]))[0] == 0.0


def _fem(R, a2, gap, h_div=20):
    R_max, _ = default_truncation(R, A_HOM_2D, B2, gap)
    mesh = defect_disk_mesh(R, R_max, R / h_div)
    return general_defect_modes(mesh, A_HOM_2D * np.eye(2), a2, B2, gap, R_max, defect_radius=R), mesh, R_max


@pytest.fixture(scope="module")
def fem_modes():
    return _fem(0.5, 1.0, (G2[0].lower, G2[0].upper))


def test_pencil_symmetric(fem_modes):
    _, mesh, R_max = fem_modes
    P = build_pencil(mesh, A_HOM_2D, 1.0, B2, R_max)
    for lam in (66.0, 72.0, 78.0):
        A = P.matrix(lam)
        assert abs(A - A.T).max() == 0.0
        assert np.isrealobj(P.sigmas(lam)[0])


def test_fem_matches_radial_coarse(fem_modes):
    modes, _, _ = fem_modes
    radial = find_radial_modes(_p2(), G2[0], [0, 1, 2, 3, 4])
    assert len(modes) == len(radial)
    for f, r in zip(modes, radial):
        assert f.eigenvalue == pytest.approx(r.eigenvalue, rel=5e-3)
        assert f.multiplicity == r.multiplicity
        assert f.m == r.m


def test_fem_m1_pair():
    gap = (G2[0].lower, G2[0].upper)
    modes, _, _ = _fem(0.62, 0.75, gap)
    m1 = [m for m in modes if m.m == 1]
    assert len(m1) == 1 and m1[0].multiplicity == 2


def test_fem_mode_count_stable_under_refinement(fem_modes):
    coarse, _, _ = fem_modes
    fine, _, _ = _fem(0.5, 1.0, (G2[0].lower, G2[0].upper), h_div=28)
    assert [m.multiplicity for m in coarse] == [m.multiplicity for m in fine]


def test_truncation_guard():
    gap = (G2[0].lower, G2[0].upper)
    mesh = defect_disk_mesh(0.2, 0.3, 0.05)
    with pytest.raises(ConfigError):
        general_defect_modes(mesh, A_HOM_2D, 1.0, B2, gap, 0.3)
