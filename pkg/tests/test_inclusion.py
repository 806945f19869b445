import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hicontrast.bessel import jv_zeros
from hicontrast.errors import GeometryError
from hicontrast.fem.meshing import disk_mesh
from hicontrast.fem.radial import RadialMesh
from hicontrast.geometry import PhaseLabel
from hicontrast.inclusion import InclusionSpectrum, ball_spectrum, fem_spectrum

INC = int(PhaseLabel.INCLUSION)


def test_ball_3d_first_eigenvalue():
    s = ball_spectrum(0.3, 1.0, 3, 5)
    assert s.entries[0].eigenvalue == pytest.approx((np.pi / 0.3) ** 2, rel=1e-14)
    assert s.entries[0].eigenvalue == pytest.approx(109.6623, abs=1e-4)


def _bisect_j0_zero():
    # independent oracle: bisection on J0 from its power series
    def j0(x):
        total, term, k = 1.0, 1.0, 0
        while abs(term) > 1e-18:
            k += 1
            term *= -(x * x / 4) / (k * k)
            total += term
        return total

    a, b = 2.0, 3.0
    for _ in range(100):
        m = 0.5 * (a + b)
        if j0(a) * j0(m) <= 0:
            b = m
        else:
            a = m
    return 0.5 * (a + b)


def test_ball_2d_first_eigenvalue():
    z = _bisect_j0_zero()
    s = ball_spectrum(0.3, 1.0, 2, 5)
    assert s.entries[0].eigenvalue == pytest.approx((z / 0.3) ** 2, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_a0_scaling(n):
    a = ball_spectrum(0.25, 1.0, n, 8).eigenvalues
    b = ball_spectrum(0.25, 2.0, n, 8).eigenvalues
    np.testing.assert_allclose(b, 2 * a, rtol=1e-14)


def test_invalid_ball():
    with pytest.raises(GeometryError):
        ball_spectrum(-0.1, 1.0, 3, 4)
    with pytest.raises(GeometryError):
        ball_spectrum(0.6, 1.0, 3, 4)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3]), st.floats(0.05, 0.45), st.floats(0.8, 0.99))
def test_domain_monotonicity(n, rho, shrink):
    big = ball_spectrum(rho, 1.0, n, 6).eigenvalues
    small = ball_spectrum(rho * shrink, 1.0, n, 6).eigenvalues
    assert np.all(small > big)


@pytest.mark.parametrize("n", [2, 3])
def test_bessel_inequality_and_partial_sums(n):
    vol = np.pi * 0.3**2 if n == 2 else 4 / 3 * np.pi * 0.3**3
    sums = [ball_spectrum(0.3, 1.0, n, k).mean_mass() for k in (1, 2, 5, 20, 80)]
    assert all(b > a for a, b in zip(sums, sums[1:]))
    assert sums[-1] <= vol


@pytest.fixture(scope="module")
def disk_spec():
    mesh = disk_mesh(0.3, 0.3 / 40, center=(0.5, 0.5), inner_tag=INC)
    return fem_spectrum(mesh, 1.0, 6)


def test_fem_disk_first_eigenvalue(disk_spec):
    exact = ball_spectrum(0.3, 1.0, 2, 1).entries[0].eigenvalue
    assert disk_spec.entries[0].eigenvalue == pytest.approx(exact, rel=5e-3)


def test_ground_state_sign_definite(disk_spec):
    v = disk_spec.extras["eigenvectors"][:, 0]
    mesh = disk_spec.extras["mesh"]
    interior = np.setdiff1d(np.arange(mesh.n_points), mesh.boundary_nodes())
    assert np.all(v[interior] > 0) or np.all(v[interior] < 0)


def test_degenerate_pair_zero_mean(disk_spec):
    e = disk_spec.entries
    assert e[1].multiplicity == 2 and e[2].multiplicity == 2
    assert e[1].zero_mean and e[2].zero_mean
    assert e[1].eigenvalue == e[2].eigenvalue


def test_fem_ball_agreement_rate():
    exact = ball_spectrum(0.3, 1.0, 2, 1).entries[0].eigenvalue
    errs, hs = [], []
    for k in (10, 20, 40):
        h = 0.3 / k
        s = fem_spectrum(disk_mesh(0.3, h, inner_tag=INC), 1.0, 1)
        errs.append(abs(s.entries[0].eigenvalue - exact))
        hs.append(h)
    rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.7 < rate < 2.4


def test_radial_fem_spectrum_3d():
    s = fem_spectrum(RadialMesh(0.3, 200, 3), 1.0, 4)
    exact = ball_spectrum(0.3, 1.0, 3, 4)
    np.testing.assert_allclose(s.eigenvalues, exact.eigenvalues, rtol=1e-4)
    np.testing.assert_allclose([e.mean for e in s.entries], [e.mean for e in exact.entries], rtol=1e-3)


def test_degenerate_mass_basis_independent(disk_spec):
    # the summed squared mean over an eigenspace does not depend on the basis
    lam, w = disk_spec.poles()
    assert len(lam) >= 1
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((2, 2)))
    means = np.array([1e-3, 2e-3])
    assert np.sum((q @ means) ** 2) == pytest.approx(np.sum(means**2), rel=1e-12)


def test_all_modes_ordering():
    s = ball_spectrum(0.3, 1.0, 2, 4, all_modes=True)
    assert s.ordering == "all_modes"
    assert any(e.zero_mean for e in s.entries)
    ev = s.eigenvalues
    assert np.all(np.diff(ev) >= 0)
    assert s.nonzero_mean().ordering == "nonzero_mean"


def test_synthetic_and_csv(tmp_path):
    s = InclusionSpectrum.synthetic([10.0, 30.0], [0.5, 0.0])
    assert s.entries[1].zero_mean
    s.to_csv(tmp_path / "s.csv")
    head = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert head.split(",") == ["index", "eigenvalue", "mean", "multiplicity", "zero_mean_flag"]


def test_jv_zero_consistency():
    z = jv_zeros(0, 3)
    s = ball_spectrum(0.2, 1.0, 2, 3)
    np.testing.assert_allclose(s.eigenvalues, (z / 0.2) ** 2, rtol=1e-14)
