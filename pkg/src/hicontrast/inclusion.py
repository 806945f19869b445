"""Dirichlet spectrum of -a0 Laplace on the inclusion and eigenfunction means.

Means are taken over the whole unit cell of the zero-extended eigenfunction
normalized in L2 of the inclusion.  Only modes with nonzero mean enter the
beta function; the others are kept and flagged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from hicontrast.bessel import jv_zeros
from hicontrast.errors import GeometryError
from hicontrast.fem import SimplicialMesh, assemble, dirichlet_elimination, eig_shift_invert
from hicontrast.fem.radial import RadialMesh
from hicontrast.geometry import PhaseLabel

MEAN_TOL = 1e-8
DEGENERACY_TOL = 1e-6
K_MAX = 20


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: float
    mean: float
    multiplicity: int = 1
    zero_mean: bool = False


@dataclass(frozen=True)
class InclusionSpectrum:
    """Ascending Dirichlet eigenvalues with the cell means of their eigenfunctions.

    ``ordering`` is ``"all_modes"`` (every eigenvalue, zero-mean ones
    flagged) or ``"nonzero_mean"`` (only modes that contribute to beta).
    ``inclusion_volume`` bounds the total squared-mean mass (Bessel
    inequality) and drives the series tail estimate; ``None`` marks a
    complete (synthetic) spectrum with no tail.
    """

    entries: tuple
    a0: float = 1.0
    k_max: int = K_MAX
    inclusion_volume: float | None = None
    ordering: str = "all_modes"
    mean_tol: float = MEAN_TOL
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        ev = [e.eigenvalue for e in self.entries]
        if any(b < a for a, b in zip(ev, ev[1:])):
            raise ValueError("spectrum entries must be ascending")
        if any(not v > 0 for v in ev):
            raise ValueError("Dirichlet eigenvalues must be positive")

    @classmethod
    def synthetic(cls, eigenvalues, squared_means, a0=1.0):
        """Complete spectrum from (eigenvalue, mean^2) pairs, e.g. for tests."""
        entries = tuple(
            SpectrumEntry(float(l), float(np.sqrt(m2)), 1, bool(np.sqrt(m2) < MEAN_TOL))
            for l, m2 in sorted(zip(eigenvalues, squared_means))
        )
        return cls(entries, a0=a0, k_max=len(entries), inclusion_volume=None, ordering="all_modes")

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([e.eigenvalue for e in self.entries])

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.entries])

    def nonzero_mean(self) -> "InclusionSpectrum":
        kept = tuple(e for e in self.entries if not e.zero_mean)
        return replace(self, entries=kept, ordering="nonzero_mean")

    def poles(self):
        """Distinct nonzero-mean eigenvalues and the summed mean^2 of each eigenspace."""
        lam, w = [], []
        for e in self.entries:
            if e.zero_mean:
                continue
            if lam and abs(e.eigenvalue - lam[-1]) <= DEGENERACY_TOL * lam[-1]:
                w[-1] += e.mean**2
            else:
                lam.append(e.eigenvalue)
                w.append(e.mean**2)
        return np.array(lam), np.array(w)

    def mean_mass(self) -> float:
        return float(sum(e.mean**2 for e in self.entries if not e.zero_mean))

    def tail_mass(self) -> float:
        if self.inclusion_volume is None:
            return 0.0
        return max(0.0, self.inclusion_volume - self.mean_mass())

    @property
    def top_eigenvalue(self) -> float:
        """Lower bound for every eigenvalue not listed."""
        ev = self.extras.get("all_eigenvalues_max")
        if ev is not None:
            return float(ev)
        return float(self.entries[-1].eigenvalue) if self.entries else np.inf

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "eigenvalue", "mean", "multiplicity", "zero_mean_flag"])
            for i, e in enumerate(self.entries, start=1):
                w.writerow([i, repr(e.eigenvalue), repr(e.mean), e.multiplicity, int(e.zero_mean)])


def _check_ball(rho, n, center=None):
    if not rho > 0:
        raise GeometryError("geometry.inclusion.radius", "must be positive")
    c = np.full(n, 0.5) if center is None else np.asarray(center, float)
    room = float(np.min(np.minimum(c, 1 - c)))
    if not rho < room:
        raise GeometryError("geometry.inclusion.radius",
                            f"ball of radius {rho} is not strictly inside the unit cell")


def ball_spectrum(rho, a0=1.0, n=3, k_max=K_MAX, all_modes=False, center=None) -> InclusionSpectrum:
    """Closed-form Dirichlet spectrum of a ball inclusion.

    Nonzero-mean modes are the radial ones: ``a0 (j pi / rho)^2`` in 3D and
    ``a0 (z_{0,j} / rho)^2`` in 2D (``z_{0,j}`` zeros of J_0), with means
    ``sqrt(8 rho^3 / pi) / j`` and ``2 sqrt(pi) rho / z_{0,j}``.  With
    ``all_modes=True`` the angular (zero-mean) modes are interleaved, each
    listed once per basis function.
    """
    if n not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    _check_ball(rho, n, center)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    volume = np.pi * rho**2 if n == 2 else 4.0 / 3.0 * np.pi * rho**3
    if n == 2:
        z = jv_zeros(0, k_max)
        radial = [(a0 * (zj / rho) ** 2, 2.0 * np.sqrt(np.pi) * rho / zj) for zj in z]
    else:
        radial = [(a0 * (j * np.pi / rho) ** 2, np.sqrt(8 * rho**3 / np.pi) / j) for j in range(1, k_max + 1)]
    entries = [SpectrumEntry(l, m, 1, False) for l, m in radial]
    ordering = "nonzero_mean"
    if all_modes:
        top = radial[-1][0]
        for order in range(1, 200):
            nu = order if n == 2 else order + 0.5
            mult = 2 if n == 2 else 2 * order + 1
            zs = jv_zeros(nu, k_max)
            lams = a0 * (zs / rho) ** 2
            lams = lams[lams <= top]
            if len(lams) == 0:
                break
            for l in lams:
                entries += [SpectrumEntry(float(l), 0.0, mult, True)] * mult
        entries.sort(key=lambda e: e.eigenvalue)
        ordering = "all_modes"
    return InclusionSpectrum(tuple(entries), a0=a0, k_max=k_max, inclusion_volume=volume,
                             ordering=ordering)


def inclusion_submesh(mesh: SimplicialMesh) -> SimplicialMesh:
    """The inclusion part of a cell mesh (or the mesh itself if untagged)."""
    tags = mesh.cell_tags
    inc = tags == int(PhaseLabel.INCLUSION)
    if np.all(inc) or not np.any(inc):
        return mesh
    sub, _ = mesh.submesh(inc)
    return sub


def inclusion_forms(mesh, a0):
    """Stiffness ``a0 K``, mass ``M``, unit-load vector and Dirichlet constraint."""
    if isinstance(mesh, RadialMesh):
        K, M = mesh.stiffness(a0), mesh.mass()
        ones = mesh.load()
    else:
        K, M = assemble(mesh, a0, "stiffness"), assemble(mesh, 1.0, "mass")
        ones = np.asarray(M.matrix.sum(axis=1)).ravel()
    used = None if isinstance(mesh, RadialMesh) else np.unique(mesh.cells)
    C = dirichlet_elimination(mesh.n_points, mesh.boundary_nodes(), used=used)
    return K, M, ones, C


def _orthonormalize(V, M):
    G = V.T @ (M @ V)
    L = np.linalg.cholesky(G)
    return np.linalg.solve(L, V.T).T


def fem_spectrum(mesh, a0=1.0, k_max=K_MAX, mean_tol=MEAN_TOL, degeneracy_tol=1e-6) -> InclusionSpectrum:
    """First ``k_max`` Dirichlet eigenpairs of ``-a0 Laplace`` on a mesh of the inclusion.

    ``mesh`` may be a full cell mesh (its inclusion-tagged part is used), an
    inclusion-only mesh, or a :class:`RadialMesh` (radial modes only).
    Degenerate eigenspaces are M-orthonormalized and a mean is reported per
    basis vector.
    """
    if not isinstance(mesh, RadialMesh):
        mesh = inclusion_submesh(mesh)
    K, M, ones, C = inclusion_forms(mesh, a0)
    Kr, Mr = C.reduce(K.matrix), C.reduce(M.matrix)
    k = min(k_max, Kr.shape[0])
    pairs = eig_shift_invert(Kr, Mr, 0.0, k)
    lam = np.array([p.eigenvalue for p in pairs])
    V = np.column_stack([p.eigenvector for p in pairs])
    order = np.argsort(lam, kind="stable")
    lam, V = lam[order], V[:, order]
    onesr = C.prolong.T @ ones
    entries = []
    i = 0
    while i < len(lam):
        j = i + 1
        while j < len(lam) and abs(lam[j] - lam[i]) <= degeneracy_tol * lam[i]:
            j += 1
        block = _orthonormalize(V[:, i:j], Mr)
        lam_c = float(np.mean(lam[i:j]))
        for col in range(block.shape[1]):
            v = block[:, col]
            mean = float(onesr @ v)
            if abs(mean) < mean_tol:
                if v[np.argmax(np.abs(v))] < 0:
                    v = -v
                entries.append(SpectrumEntry(lam_c, 0.0 if mean == 0 else abs(mean), j - i, True))
            else:
                entries.append(SpectrumEntry(lam_c, abs(mean), j - i, False))
            block[:, col] = v if mean >= 0 or abs(mean) < mean_tol else -v
        V[:, i:j] = block
        i = j
    volume = 4.0 / 3.0 * np.pi * mesh.radius**3 if getattr(mesh, "scheme", "") == "blended" else float(ones.sum())
    spec = InclusionSpectrum(tuple(entries), a0=a0, k_max=k_max, inclusion_volume=volume,
                             ordering="all_modes", mean_tol=mean_tol)
    full = C.expand(V)
    if isinstance(mesh, RadialMesh):
        full = np.column_stack([mesh.field_values(c) for c in full.T])
    spec.extras["eigenvectors"] = full
    spec.extras["mesh"] = mesh
    return spec
