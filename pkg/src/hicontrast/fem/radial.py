"""Radially symmetric linear elements on a ball of radius ``radius`` in R^n.

Functions of ``r = |y - y0|`` only.  Two schemes:

``consistent``
    unknown ``V(r)``, element integrals weighted by ``|S^{n-1}| r^{n-1}``, so
    the forms equal the n-dimensional ones restricted to radial functions.
``blended`` (n = 3 only, the default there)
    unknown ``w = r V``, for which the radial Laplacian is exactly ``w''``
    and ``w(0) = 0``.  The mass is the average of the consistent and lumped
    1D masses, which cancels the leading O(h^2) eigenvalue error on a
    uniform grid (eigenvalue error O(h^4)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from hicontrast.fem.assembly import SymmetricForm, symmetrize

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)
SCHEMES = ("consistent", "blended")


def sphere_area(n):
    return {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}[n]


@dataclass(frozen=True)
class RadialMesh:
    radius: float
    n_elements: int
    dimension: int = 3
    scheme: str | None = None

    def __post_init__(self):
        if self.scheme is None:
            object.__setattr__(self, "scheme", "blended" if self.dimension == 3 else "consistent")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown radial scheme {self.scheme!r}")
        if self.scheme == "blended" and self.dimension != 3:
            raise ValueError("the blended scheme needs dimension 3")
        if self.n_elements < 1 or not self.radius > 0:
            raise ValueError("need a positive radius and at least one element")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.radius, self.n_elements + 1)

    @property
    def n_points(self) -> int:
        return self.n_elements + 1

    @property
    def h(self) -> float:
        return self.radius / self.n_elements

    def boundary_nodes(self) -> np.ndarray:
        """Dirichlet nodes: the sphere, plus the centre when the unknown is ``r V``."""
        if self.scheme == "blended":
            return np.array([0, self.n_elements])
        return np.array([self.n_elements])

    def _weight(self, x):
        if self.scheme == "blended":
            return sphere_area(3) * np.ones_like(x)
        return sphere_area(self.dimension) * x ** (self.dimension - 1)

    def _quad(self):
        r = self.nodes
        a, b = r[:-1, None], r[1:, None]
        x = 0.5 * (a + b) + 0.5 * (b - a) * _GAUSS_X[None, :]
        w = 0.5 * (b - a) * _GAUSS_W[None, :] * self._weight(x)
        t = (x - a) / (b - a)
        return x, t, w, (b - a)[:, 0]

    def _assemble(self, local):
        n = self.n_elements
        i = np.arange(n)
        rows = np.column_stack([i, i, i + 1, i + 1]).ravel()
        cols = np.column_stack([i, i + 1, i, i + 1]).ravel()
        A = sp.coo_matrix((local.reshape(n, 4).ravel(), (rows, cols)), shape=(n + 1, n + 1)).tocsr()
        return SymmetricForm(symmetrize(A))

    def stiffness(self, coefficient=1.0) -> SymmetricForm:
        _, _, w, L = self._quad()
        s = coefficient * w.sum(axis=1) / L**2
        local = s[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])[None]
        return self._assemble(local)

    def mass(self, coefficient=1.0) -> SymmetricForm:
        _, t, w, _ = self._quad()
        phi = np.stack([1 - t, t], axis=1)  # (n, 2, q)
        local = coefficient * np.einsum("niq,njq,nq->nij", phi, phi, w)
        if self.scheme == "blended":
            lumped = np.zeros_like(local)
            rows = local.sum(axis=2)
            lumped[:, 0, 0], lumped[:, 1, 1] = rows[:, 0], rows[:, 1]
            local = 0.5 * (local + lumped)
        return self._assemble(local)

    def load(self) -> np.ndarray:
        """Integrals over the ball of each basis function, as a function of ``V``."""
        x, t, w, _ = self._quad()
        phi = np.stack([1 - t, t], axis=1)
        f = x if self.scheme == "blended" else np.ones_like(x)
        per = np.einsum("niq,nq->ni", phi, w * f)
        out = np.zeros(self.n_points)
        np.add.at(out, np.arange(self.n_elements), per[:, 0])
        np.add.at(out, np.arange(1, self.n_points), per[:, 1])
        return out

    def field_values(self, u) -> np.ndarray:
        """Nodal ``V`` from the unknown (divides by ``r`` in the blended scheme)."""
        u = np.asarray(u, float)
        if self.scheme != "blended":
            return u
        r = self.nodes
        V = np.empty_like(u)
        V[1:] = u[1:] / r[1:]
        V[0] = u[1] / r[1]  # w'(0)
        return V
