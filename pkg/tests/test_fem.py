import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hicontrast.errors import AssemblyError, PeriodicMatchError
from hicontrast.fem.assembly import assemble, element_matrices
from hicontrast.fem.constraints import dirichlet_elimination, periodic_identify, quotient_euler_characteristic
from hicontrast.fem.eigen import count_below, eig_in_window, eig_shift_invert
from hicontrast.fem.mesh import SimplicialMesh
from hicontrast.fem.meshing import interval_mesh, periodic_cell_mesh, periodic_cube_mesh, rectangle_mesh
from hicontrast.fem.assembly import SymmetricForm


def test_right_triangle_stiffness():
    m = SimplicialMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    K = element_matrices(m, 1.0, "stiffness")[0]
    np.testing.assert_allclose(K, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_mass_total_is_area(nx, ny, w, hgt):
    m = rectangle_mesh(nx, ny, 0.0, w, 0.0, hgt)
    M = assemble(m, 1.0, "mass").matrix
    assert M.sum() == pytest.approx(w * hgt, rel=1e-12)


def test_stiffness_kills_constants():
    m = periodic_cell_mesh(0.3, 0.1)
    K = assemble(m, np.where(m.cell_tags == 0, 0.01, 1.0), "stiffness").matrix
    assert np.max(np.abs(K @ np.ones(m.n_points))) < 1e-12


def test_assembled_matrices_exactly_symmetric():
    m = periodic_cell_mesh(0.3, 0.08)
    rng = np.random.default_rng(3)
    for kind in ("stiffness", "mass"):
        A = assemble(m, rng.uniform(0.5, 2.0, m.n_cells), kind).matrix.tocsr()
        At = A.T.tocsr()
        A.sort_indices()
        At.sort_indices()
        assert np.array_equal(A.indptr, At.indptr) and np.array_equal(A.indices, At.indices)
        assert np.array_equal(A.data, At.data)


def test_degenerate_element_raises():
    m = SimplicialMesh(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([[0, 1, 2]]))
    with pytest.raises(AssemblyError) as exc:
        assemble(m)
    assert "0" in str(exc.value)


def test_periodic_grid_count():
    m = rectangle_mesh(4, 4)
    assert m.n_points == 25
    assert periodic_identify(m).n_free == 16


def test_strip_is_a_torus():
    m = rectangle_mesh(5, 1)
    c = periodic_identify(m)
    assert quotient_euler_characteristic(m, c) == 0


def test_unmatched_periodic_vertex():
    m = rectangle_mesh(4, 4)
    pts = m.points.copy()
    k = np.flatnonzero((np.abs(pts[:, 0] - 1.0) < 1e-12) & (np.abs(pts[:, 1] - 0.5) < 1e-12))[0]
    pts[k, 1] += 1e-3
    with pytest.raises(PeriodicMatchError) as exc:
        periodic_identify(SimplicialMesh(pts, m.cells))
    assert len(exc.value.coords) >= 1


def test_cell_meshes_match_periodically():
    periodic_identify(periodic_cell_mesh(0.3, 0.05))
    periodic_identify(periodic_cube_mesh(0.3, 8))


def test_mesh_roundtrip(tmp_path):
    m = periodic_cell_mesh(0.3, 0.1)
    m.write(tmp_path / "m.txt")
    r = SimplicialMesh.read(tmp_path / "m.txt")
    np.testing.assert_array_equal(r.points, m.points)
    np.testing.assert_array_equal(r.cells, m.cells)
    np.testing.assert_array_equal(r.cell_tags, m.cell_tags)


def test_positive_orientation():
    for m in (periodic_cell_mesh(0.3, 0.1), periodic_cube_mesh(0.3, 6)):
        assert np.all(m.volumes() > 0)


def _dirichlet(m):
    c = dirichlet_elimination(m.n_points, m.boundary_nodes())
    return assemble(m).with_constraint(c), assemble(m, kind="mass").with_constraint(c)


def test_1d_laplacian_first_eigenvalue():
    K, M = _dirichlet(interval_mesh(0.0, 1.0, 512))
    pair = eig_shift_invert(K, M, 9.0, k=1)[0]
    assert pair.eigenvalue == pytest.approx(np.pi**2, rel=1e-3)


def test_diagonal_pencil():
    K = sp.diags([1.0, 2.0, 3.0]).tocsr()
    M = sp.identity(3, format="csr")
    assert eig_shift_invert(K, M, 2.1, k=1)[0].eigenvalue == pytest.approx(2.0)


def test_below_spectrum_ordering():
    K, M = _dirichlet(interval_mesh(0.0, 1.0, 600))
    w = [p.eigenvalue for p in eig_shift_invert(K, M, -5.0, k=3)]
    assert w == sorted(w)
    np.testing.assert_allclose(w, [(j * np.pi) ** 2 for j in (1, 2, 3)], rtol=1e-3)


def test_square_galerkin_rate_and_orthogonality():
    errs, hs = [], []
    for n in (8, 16, 32):
        K, M = _dirichlet(rectangle_mesh(n, n))
        pairs = eig_shift_invert(K, M, 0.0, k=4)
        errs.append(abs(pairs[0].eigenvalue - 2 * np.pi**2))
        hs.append(1.0 / n)
        Mr = M.reduced()
        V = np.column_stack([p.eigenvector for p in pairs])
        G = V.T @ Mr @ V
        assert np.max(np.abs(G - np.diag(np.diag(G)))) <= 1e-6
        np.testing.assert_allclose(np.diag(G), 1.0, atol=1e-10)
    rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert rate == pytest.approx(2.0, abs=0.2)


def test_residual_contract():
    K, M = _dirichlet(rectangle_mesh(30, 30))
    for p in eig_shift_invert(K, M, 50.0, k=3):
        Kr, Mr = K.reduced(), M.reduced()
        r = Kr @ p.eigenvector - p.eigenvalue * (Mr @ p.eigenvector)
        assert np.linalg.norm(r) <= 1e-8 * p.eigenvalue * np.linalg.norm(Mr @ p.eigenvector)


def test_deterministic_eigenvectors():
    K, M = _dirichlet(rectangle_mesh(40, 40))
    a = eig_shift_invert(K, M, 100.0, k=2)
    b = eig_shift_invert(K, M, 100.0, k=2)
    for p, q in zip(a, b):
        assert np.array_equal(p.eigenvector, q.eigenvector)


def test_triplet_export(tmp_path):
    A = assemble(rectangle_mesh(2, 2))
    A.export_triplets(tmp_path / "a.txt")
    rows = np.loadtxt(tmp_path / "a.txt", ndmin=2, skiprows=1)
    assert rows.shape[1] == 3
    assert rows[:, 2].sum() == pytest.approx(A.matrix.sum(), abs=1e-12)
    assert isinstance(A, SymmetricForm)


@pytest.mark.parametrize("shift", [30.0, 100.0, 260.0])
def test_inertia_count_matches_dense(shift):
    K, M = _dirichlet(rectangle_mesh(20, 20))
    import scipy.linalg as sla

    w = sla.eigh(K.reduced().toarray(), M.reduced().toarray(), eigvals_only=True)
    assert count_below(K, M, shift) == int(np.sum(w < shift))


def test_window_solver_returns_exactly_the_window():
    K, M = _dirichlet(rectangle_mesh(24, 24))
    # exact Dirichlet square eigenvalues near 5 pi^2: (1,2) and (2,1) pair
    pairs, clipped = eig_in_window(K, M, 5 * np.pi**2, 10.0, k=6)
    assert not clipped
    assert len(pairs) == 2
    for p in pairs:
        assert abs(p.eigenvalue - 5 * np.pi**2) < 10.0
        assert p.residual <= 1e-8
    empty, _ = eig_in_window(K, M, 35.0, 2.0, k=6)
    assert empty == []
