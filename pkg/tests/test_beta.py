import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hicontrast.beta import (
    BetaEvaluator,
    beta_direct,
    beta_explicit_ball,
    beta_series,
    beta_series_with_tail,
    find_gaps,
    solve_V,
)
from hicontrast.errors import PoleProximityError
from hicontrast.fem.meshing import disk_mesh
from hicontrast.fem.radial import RadialMesh
from hicontrast.geometry import PhaseLabel
from hicontrast.inclusion import InclusionSpectrum, ball_spectrum

SYN = InclusionSpectrum.synthetic([10.0], [0.5])
EMPTY = InclusionSpectrum.synthetic([10.0], [0.0])


def test_series_examples():
    assert beta_series(SYN, 0.0) == 0.0
    assert beta_series(SYN, 5.0) == pytest.approx(7.5, rel=1e-15)
    assert beta_series(EMPTY, 3.7) == pytest.approx(3.7, rel=1e-15)


def test_pole_guard():
    with pytest.raises(PoleProximityError) as exc:
        beta_series(SYN, 10.0 * (1 + 1e-8))
    assert exc.value.pole == 10.0


def test_synthetic_gap_closed_form():
    g = find_gaps(BetaEvaluator.series(SYN), 50.0, 1e-12)
    assert len(g) == 1
    assert g[0].lower == pytest.approx(10.0, abs=1e-9)
    assert g[0].upper == pytest.approx(20.0, abs=1e-9)
    assert g[0].lower_kind == "pole" and g[0].upper_kind == "zero"


def test_empty_spectrum_has_no_gaps():
    assert len(find_gaps(BetaEvaluator.series(EMPTY), 100.0)) == 0


def test_explicit_ball_limits():
    assert beta_explicit_ball(0.3, 1.0, 0.0) == 0.0
    assert abs(beta_explicit_ball(0.3, 1.0, 1e-8)) < 1e-7
    lam = 37.0
    assert beta_explicit_ball(1e-6, 1.0, lam) == pytest.approx(lam, rel=1e-6)


def test_explicit_ball_pole_signs():
    pole = (np.pi / 0.3) ** 2
    assert pole == pytest.approx(109.6623, abs=1e-4)
    below = [beta_explicit_ball(0.3, 1.0, pole * (1 - d)) for d in (1e-2, 1e-3, 1e-4)]
    above = [beta_explicit_ball(0.3, 1.0, pole * (1 + d)) for d in (1e-2, 1e-3, 1e-4)]
    # the series term w / (lam_j - lam) fixes the directions: +inf from below, -inf from above
    assert below[0] < below[1] < below[2] and below[2] > 1e3
    assert above[0] > above[1] > above[2] and above[2] < -1e3
    s = BetaEvaluator.series(ball_spectrum(0.3, 1.0, 3, 20))
    assert s(pole * (1 - 1e-4)) > 1e3 and s(pole * (1 + 1e-4)) < -1e3


@pytest.mark.parametrize("a0", [0.5, 1.0, 2.0])
def test_explicit_vs_direct_with_a0(a0):
    mesh = RadialMesh(0.3, 400, 3)
    lam1 = a0 * (np.pi / 0.3) ** 2
    for lam in lam1 * np.array([0.3, 0.7, 1.05, 1.5, 2.5]):
        d = beta_direct(mesh, a0, lam)
        e = beta_explicit_ball(0.3, a0, lam, 3)
        assert d == pytest.approx(e, rel=1e-3)


def test_explicit_2d_vs_direct():
    mesh = RadialMesh(0.3, 800, 2)
    for lam in (20.0, 50.0, 70.0, 120.0):
        assert beta_direct(mesh, 1.0, lam) == pytest.approx(beta_explicit_ball(0.3, 1.0, lam, 2), rel=1e-3)


def test_solve_V_zero_and_positive():
    mesh = disk_mesh(0.3, 0.3 / 30, center=(0.5, 0.5), inner_tag=int(PhaseLabel.INCLUSION))
    z = solve_V(mesh, 1.0, 0.0)
    assert np.all(z.values == 0) and z.mean == 0.0
    lam1 = ball_spectrum(0.3, 1.0, 2, 1).entries[0].eigenvalue
    v = solve_V(mesh, 1.0, 0.5 * lam1)
    assert v.values.min() >= -1e-12


def test_V_mean_matches_spectral_sum():
    spec = ball_spectrum(0.3, 1.0, 3, 20)
    mesh = RadialMesh(0.3, 400, 3)
    lam = 113.0  # inside the first gap
    series = lam * sum(e.mean**2 / (e.eigenvalue - lam) for e in spec.entries)
    tail = beta_series_with_tail(spec, lam)[1] / lam
    assert abs(solve_V(mesh, 1.0, lam).mean - series) <= tail + 1e-3 * abs(series)


def test_direct_series_on_fem_disk():
    mesh = disk_mesh(0.3, 0.3 / 30, center=(0.5, 0.5), inner_tag=int(PhaseLabel.INCLUSION))
    ev = BetaEvaluator.direct(mesh, 1.0, 20)
    ser = BetaEvaluator.series(ev.spectrum, tail_tol=1.0)
    g = find_gaps(ev, 1.5 * ev.poles[0])[0]
    for lam in np.linspace(g.lower, g.upper, 12)[1:-1]:
        d, s = ev(lam), ser(lam)
        assert abs(d - s) <= ser.tail_bound(lam) + 2e-3 * max(1.0, abs(d))


@pytest.mark.parametrize("n", [2, 3])
def test_beta_increasing_below_first_pole(n):
    ev = BetaEvaluator.explicit_ball(0.3, 1.0, n)
    lams = np.linspace(1e-3, ev.poles[0] * (1 - 1e-4), 400)
    vals = np.array([ev(l) for l in lams])
    assert np.all(np.diff(vals) > 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(1.0, 500.0), st.floats(0.01, 1.0)), min_size=1, max_size=6,
                unique_by=lambda t: round(t[0], 1)))
def test_one_sign_change_between_poles(modes):
    lam = sorted(m[0] for m in modes)
    if min(np.diff(lam), default=1.0) < 0.5:
        return
    s = InclusionSpectrum.synthetic(lam, [m[1] for m in sorted(modes)])
    ev = BetaEvaluator.series(s)
    poles = ev.poles
    for a, b in zip(poles, poles[1:]):
        t = np.concatenate([[a * (1 + 2e-6)], np.linspace(a, b, 402)[1:-1], [b * (1 - 2e-6)]])
        v = np.array([ev(x) for x in t])
        assert v[0] < 0 < v[-1]
        assert np.count_nonzero(np.diff(np.sign(v)) != 0) == 1


def test_ball_gap_structure():
    ev = BetaEvaluator.explicit_ball(0.3, 1.0, 3)
    table = find_gaps(ev, 3 * ev.poles[2])
    assert len(table) >= 3
    for g in table:
        assert g.lower_kind == "pole"
        assert min(abs(g.lower - p) for p in ev.poles) <= table.gap_tol
        assert g.midpoint_beta < 0
        assert abs(ev(g.upper)) < 1e-6 * g.upper or g.upper_kind == "truncated"
    lows = [g.lower for g in table]
    assert lows == sorted(lows)
    assert all(a.upper <= b.lower for a, b in zip(table, table[1:]))


def test_tail_refusal():
    spec = ball_spectrum(0.3, 1.0, 3, 2)
    with pytest.raises(ValueError):
        beta_series(spec, 900.0)
