"""Linear-element Galerkin assembly of stiffness and mass forms."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from hicontrast.errors import AssemblyError

DEGENERACY_TOL = 1e-13


@dataclass
class ConstraintMap:
    """Linear map from free DOFs to full DOFs, ``u_full = prolong @ u_free``.

    Covers periodic identification (slave rows copy their master column) and
    Dirichlet elimination (eliminated rows are empty).
    """

    prolong: sp.csr_matrix

    @property
    def n_full(self) -> int:
        return self.prolong.shape[0]

    @property
    def n_free(self) -> int:
        return self.prolong.shape[1]

    def reduce(self, A):
        P = self.prolong
        R = (P.T @ A @ P).tocsr()
        return symmetrize(R)

    def expand(self, u_free):
        return self.prolong @ u_free

    def compose(self, inner: "ConstraintMap") -> "ConstraintMap":
        """Apply ``inner`` on the free space of ``self``."""
        return ConstraintMap((self.prolong @ inner.prolong).tocsr())


@dataclass
class SymmetricForm:
    """Sparse symmetric matrix with an optional constraint map."""

    matrix: sp.csr_matrix
    constraint: ConstraintMap | None = None

    @property
    def n_dofs(self) -> int:
        if self.constraint is None:
            return self.matrix.shape[0]
        return self.constraint.n_free

    def reduced(self) -> sp.csr_matrix:
        if self.constraint is None:
            return self.matrix
        return self.constraint.reduce(self.matrix)

    def with_constraint(self, constraint) -> "SymmetricForm":
        return SymmetricForm(self.matrix, constraint)

    def export_triplets(self, path) -> None:
        """Coordinate-triplet text dump (row col value), for debugging."""
        A = self.matrix.tocoo()
        with Path(path).open("w") as f:
            f.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for i, j, v in zip(A.row, A.col, A.data):
                f.write(f"{i} {j} {float(v)!r}\n")


def symmetrize(A):
    """Exactly symmetric copy (a + b == b + a in floating point)."""
    A = sp.csr_matrix(A)
    S = (A + A.T) * 0.5
    S = S.tocsr()
    S.sort_indices()
    return S


def shape_gradients(mesh):
    """Gradients of the barycentric shape functions, shape (M, d+1, d)."""
    d = mesh.dim
    p = mesh.points[mesh.cells]
    jac = p[:, 1:, :] - p[:, :1, :]  # rows: edge vectors
    det = np.linalg.det(jac) if d > 1 else jac[:, 0, 0]
    vol = np.abs(det) / factorial(d)
    scale = np.max(np.abs(jac).reshape(len(jac), -1), axis=1) ** d
    bad = np.flatnonzero(vol <= DEGENERACY_TOL * np.maximum(scale, 1e-300))
    if len(bad):
        raise AssemblyError(int(bad[0]), float(vol[bad[0]]))
    inv = np.linalg.inv(jac)  # (M, d, d): columns are gradients of lambda_1..lambda_d
    g = np.empty((len(p), d + 1, d))
    g[:, 1:, :] = inv.transpose(0, 2, 1)
    g[:, 0, :] = -g[:, 1:, :].sum(axis=1)
    return g, vol


def _coefficient_array(mesh, coefficient):
    c = np.broadcast_to(np.asarray(coefficient, dtype=float), (mesh.n_cells,))
    if np.any(~(c > 0)):
        i = int(np.flatnonzero(~(c > 0))[0])
        raise ValueError(f"coefficient must be positive on every element (element {i}: {c[i]})")
    return c


def element_matrices(mesh, coefficient=1.0, kind="stiffness", tensor=None):
    """Local matrices, shape (M, d+1, d+1).

    ``tensor`` (d x d, symmetric positive definite) turns the stiffness into
    ``int c grad(u) . T grad(v)``.
    """
    c = _coefficient_array(mesh, coefficient)
    d = mesh.dim
    if kind == "stiffness":
        g, vol = shape_gradients(mesh)
        if tensor is None:
            local = np.einsum("eik,ejk->eij", g, g)
        else:
            T = np.asarray(tensor, float)
            local = np.einsum("eik,kl,ejl->eij", g, T, g)
        return local * (vol * c)[:, None, None]
    if kind == "mass":
        _, vol = shape_gradients(mesh)
        ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
        return ref[None, :, :] * (vol * c)[:, None, None]
    raise ValueError(f"unknown form kind {kind!r}")


def assemble(mesh, coefficient=1.0, kind="stiffness", cells=None, tensor=None) -> SymmetricForm:
    """Assemble a P1 stiffness or mass form.

    ``coefficient`` is a scalar or one value per element; ``cells`` optionally
    restricts assembly to a boolean/int selection of elements (the matrix
    keeps the full vertex numbering).
    """
    local = element_matrices(mesh, coefficient, kind, tensor)
    conn = mesh.cells
    if cells is not None:
        local = local[cells]
        conn = conn[cells]
    nloc = conn.shape[1]
    rows = np.repeat(conn, nloc, axis=1).ravel()
    cols = np.tile(conn, (1, nloc)).ravel()
    n = mesh.n_points
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return SymmetricForm(symmetrize(A))


def lumped_volume(mesh, cells=None) -> np.ndarray:
    """Row sums of the unit mass matrix (nodal quadrature weights)."""
    vol = mesh.volumes()
    conn = mesh.cells
    if cells is not None:
        vol, conn = vol[cells], conn[cells]
    w = np.zeros(mesh.n_points)
    np.add.at(w, conn.ravel(), np.repeat(vol / conn.shape[1], conn.shape[1]))
    return w


def integrate(mesh, values, cells=None) -> float:
    """Integral of a nodal P1 field over (a subset of) the mesh."""
    return float(lumped_volume(mesh, cells) @ values)
