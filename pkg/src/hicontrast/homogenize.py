"""Perforated-cell correctors and the homogenized matrix-phase tensor.

The inclusion is treated as a hole: for each direction ``j`` the periodic
corrector solves ``div(a1 (e_j + grad N_j)) = 0`` in the matrix with the
natural (zero total flux) condition on the inclusion boundary, and

    A_ij = int_{Q1} a1 (delta_ij + d_i N_j) dy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from hicontrast.errors import GeometryError
from hicontrast.fem.assembly import assemble, lumped_volume, shape_gradients
from hicontrast.fem.constraints import dirichlet_elimination, periodic_identify
from hicontrast.fem.eigen import factorize
from hicontrast.geometry import PhaseLabel


def _matrix_part(mesh):
    mask = mesh.cell_tags == int(PhaseLabel.MATRIX)
    if not np.any(mask):
        raise GeometryError("geometry.inclusion", "cell mesh has no matrix elements")
    if np.all(mask):
        return mesh, np.arange(mesh.n_points), mask
    sub, used = mesh.submesh(mask)
    return sub, used, mask


@dataclass
class CorrectorSystem:
    """Pinned periodic stiffness on the matrix part and per-direction loads."""

    mesh: object
    vertex_ids: np.ndarray  # matrix-mesh vertex -> vertex of the input mesh
    constraint: object
    lu: object
    loads: np.ndarray  # (n_free, d)
    rhs_sums: np.ndarray  # compatibility residual per direction


def corrector_system(mesh, a1=1.0) -> CorrectorSystem:
    mm, used, _ = _matrix_part(mesh)
    d = mm.dim
    per = periodic_identify(mm)
    K = per.reduce(assemble(mm, a1, "stiffness").matrix)
    ncomp, _ = connected_components(sp.csr_matrix(K != 0), directed=False)
    if ncomp > 1:
        raise GeometryError("geometry.inclusion", f"matrix phase splits into {ncomp} pieces")
    g, vol = shape_gradients(mm)
    loads = np.zeros((mm.n_points, d))
    for j in range(d):
        np.add.at(loads[:, j], mm.cells.ravel(), (-a1 * vol[:, None] * g[:, :, j]).ravel())
    red = per.prolong.T @ loads
    rhs_sums = red.sum(axis=0)
    pin = dirichlet_elimination(per.n_free, [0])
    C = per.compose(pin)
    lu = factorize(pin.reduce(K))
    return CorrectorSystem(mm, used, C, lu, C.prolong.T @ loads, rhs_sums)


def solve_corrector(mesh, a1=1.0, direction=0, system: CorrectorSystem | None = None):
    """Nodal corrector ``N_j`` on the matrix part of ``mesh`` (one constant pinned).

    Returns the values on the matrix submesh vertices; use
    :func:`homogenized_tensor` for normalized fields on the full mesh.
    """
    s = system or corrector_system(mesh, a1)
    return s.constraint.expand(s.lu.solve(s.loads[:, direction]))


def harmonic_extension(mesh, values, matrix_vertices):
    """Extend nodal values given on the matrix vertices harmonically into the inclusion."""
    inc = mesh.cell_tags != int(PhaseLabel.MATRIX)
    out = np.zeros(mesh.n_points)
    out[matrix_vertices] = values
    if not np.any(inc):
        return out
    inner = np.setdiff1d(np.unique(mesh.cells[inc]), matrix_vertices)
    if len(inner) == 0:
        return out
    K = assemble(mesh, 1.0, "stiffness", cells=inc).matrix.tocsr()
    Kii = K[inner][:, inner]
    rhs = -K[inner][:, matrix_vertices] @ values
    out[inner] = factorize(Kii).solve(rhs)
    return out


@dataclass
class HomogenizedTensor:
    A: np.ndarray
    Q1_volume: float
    correctors: np.ndarray = field(repr=False)  # (n_points, d) on the input mesh
    asymmetry: float = 0.0
    mesh_h: float = float("nan")
    compatibility: float = 0.0

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    @property
    def scalar(self) -> float:
        """Isotropic part ``tr(A) / n``."""
        return float(np.trace(self.A) / self.dimension)

    @property
    def anisotropy(self) -> float:
        return float(np.max(np.abs(self.A - self.scalar * np.eye(self.dimension))))

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "Q1_volume": self.Q1_volume,
            "mesh_h": self.mesh_h,
            "asymmetry": self.asymmetry,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def homogenized_tensor(mesh, a1=1.0, extend=True) -> HomogenizedTensor:
    """Correctors for every direction and the tensor ``A_ij``.

    Correctors are extended harmonically into the inclusion (when the mesh
    contains it and ``extend`` is set) and shifted to zero mean over the
    cell; without inclusion elements the mean is taken over the matrix.
    """
    s = corrector_system(mesh, a1)
    mm = s.mesh
    d = mm.dim
    g, vol = shape_gradients(mm)
    A = np.zeros((d, d))
    fields = np.zeros((mesh.n_points, d))
    for j in range(d):
        N = solve_corrector(mesh, a1, j, s)
        grad = np.einsum("ek,eki->ei", N[mm.cells], g)
        A[:, j] = a1 * (vol.sum() * np.eye(d)[:, j] + (vol[:, None] * grad).sum(axis=0))
        if extend and mm is not mesh:
            full = harmonic_extension(mesh, N, s.vertex_ids)
            full -= lumped_volume(mesh) @ full / mesh.volumes().sum()
        else:
            full = np.zeros(mesh.n_points)
            full[s.vertex_ids] = N - lumped_volume(mm) @ N / vol.sum()
        fields[:, j] = full
    asym = float(np.max(np.abs(A - A.T)))
    A = 0.5 * (A + A.T)
    return HomogenizedTensor(A, float(vol.sum()), fields, asym, mesh.h(),
                             float(np.max(np.abs(s.rhs_sums))))


def cell_energy(mesh, a1, xi) -> float:
    """``min_w int_{Q1} a1 |xi + grad w|^2`` over periodic linear elements."""
    s = corrector_system(mesh, a1)
    xi = np.asarray(xi, float)
    w = s.constraint.expand(s.lu.solve(s.loads @ xi))
    mm = s.mesh
    g, vol = shape_gradients(mm)
    grad = xi[None, :] + np.einsum("ek,eki->ei", w[mm.cells], g)
    return float(a1 * np.sum(vol * np.einsum("ei,ei->e", grad, grad)))


def richardson(values, hs, order=2.0) -> float:
    """Extrapolate the two finest values assuming error ``C h^order``."""
    (h1, v1), (h2, v2) = sorted(zip(hs, values))[:2]
    r = (h2 / h1) ** order
    return float(v1 + (v1 - v2) / (r - 1.0))


def observed_order(values, ratio=2.0) -> float:
    """Convergence order from three values on meshes refined by ``ratio``."""
    v1, v2, v3 = values
    return float(np.log(abs((v1 - v2) / (v2 - v3))) / np.log(ratio))
