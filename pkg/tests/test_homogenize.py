import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from hicontrast.fem.mesh import SimplicialMesh
from hicontrast.fem.meshing import periodic_cell_mesh, periodic_cube_mesh, rectangle_mesh
from hicontrast.geometry import PhaseLabel
from hicontrast.homogenize import cell_energy, corrector_system, homogenized_tensor, observed_order

Q1 = 1 - np.pi * 0.09


@pytest.fixture(scope="module")
def disk():
    mesh = periodic_cell_mesh(0.3, 1 / 32)
    return mesh, homogenized_tensor(mesh, 1.0)


def test_empty_inclusion_gives_identity():
    m = rectangle_mesh(6, 6)
    m = SimplicialMesh(m.points, m.cells, np.full(m.n_cells, int(PhaseLabel.MATRIX)))
    t = homogenized_tensor(m, 1.0)
    np.testing.assert_allclose(t.A, np.eye(2), atol=1e-12)
    assert np.max(np.abs(t.correctors)) < 1e-12


def test_compatibility_of_loads(disk):
    mesh, t = disk
    assert t.compatibility < 1e-12
    assert np.max(np.abs(corrector_system(mesh, 1.0).rhs_sums)) < 1e-12


def test_reflection_symmetry_of_corrector(disk):
    mesh, t = disk
    tree = cKDTree(mesh.points)
    N1 = t.correctors[:, 0]
    mx = mesh.points.copy()
    mx[:, 0] = 1.0 - mx[:, 0]
    d, i = tree.query(mx)
    ok = d < 1e-9
    assert ok.mean() > 0.99
    # odd under y1 -> 1 - y1 (up to the periodic constant on the cell faces)
    np.testing.assert_allclose(N1[ok], -N1[i[ok]], atol=1e-9)
    my = mesh.points.copy()
    my[:, 1] = 1.0 - my[:, 1]
    d, i = tree.query(my)
    ok = d < 1e-9
    np.testing.assert_allclose(N1[ok], N1[i[ok]], atol=1e-9)


def test_disk_tensor_properties(disk):
    _, t = disk
    assert t.asymmetry < 1e-10
    a = t.scalar
    assert 0 < a < Q1
    assert t.anisotropy < 1e-4
    assert np.all(np.linalg.eigvalsh(t.A) > 0)
    assert t.Q1_volume == pytest.approx(Q1, rel=2e-3)


def test_variational_consistency(disk):
    mesh, t = disk
    for j in range(2):
        xi = np.eye(2)[j]
        assert cell_energy(mesh, 1.0, xi) == pytest.approx(t.A[j, j], abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_voigt_bound(x, y):
    mesh = periodic_cell_mesh(0.3, 1 / 16)
    t = _cached(mesh)
    xi = np.array([x, y])
    assert xi @ t.A @ xi <= t.Q1_volume * (xi @ xi) + 1e-14


_CACHE = {}


def _cached(mesh):
    key = mesh.n_points
    if key not in _CACHE:
        _CACHE[key] = homogenized_tensor(mesh, 1.0)
    return _CACHE[key]


def test_monotone_in_radius():
    a2 = homogenized_tensor(periodic_cell_mesh(0.2, 1 / 32), 1.0).scalar
    a3 = homogenized_tensor(periodic_cell_mesh(0.3, 1 / 32), 1.0).scalar
    assert a2 > a3


def test_a1_scaling():
    mesh = periodic_cell_mesh(0.3, 1 / 16)
    np.testing.assert_allclose(homogenized_tensor(mesh, 2.5).A, 2.5 * homogenized_tensor(mesh, 1.0).A,
                               rtol=1e-12, atol=1e-14)


def test_mesh_convergence_rate():
    vals = [homogenized_tensor(periodic_cell_mesh(0.3, h), 1.0).scalar for h in (1 / 16, 1 / 32, 1 / 64)]
    assert observed_order(vals) >= 1.7


def test_zero_mean_correctors(disk):
    mesh, t = disk
    from hicontrast.fem.assembly import lumped_volume

    w = lumped_volume(mesh)
    assert np.max(np.abs(w @ t.correctors)) < 1e-12


def test_3d_cube_cell():
    t = homogenized_tensor(periodic_cube_mesh(0.3, 10), 1.0)
    q1 = 1 - 4 / 3 * np.pi * 0.027
    assert 0 < t.scalar < q1
    assert t.asymmetry < 1e-10
    assert t.anisotropy < 2e-2 * t.scalar
