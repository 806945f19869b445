"""Simplicial meshes (intervals, triangles, tetrahedra) with phase tags."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from itertools import combinations
from pathlib import Path

import numpy as np


class FacetMarker(IntEnum):
    INTERIOR = 0
    OUTER = 1
    INCLUSION_INTERFACE = 2
    DEFECT_INTERFACE = 3


@dataclass
class SimplicialMesh:
    """Conforming simplicial mesh.

    Attributes
    ----------
    points : (N, d) float array
    cells : (M, d+1) int array, positively oriented
    cell_tags : (M,) int array of phase labels (see ``geometry.PhaseLabel``)
    facets : (K, d) int array of tagged facets (boundary and interfaces)
    facet_markers : (K,) int array of :class:`FacetMarker` values
    """

    points: np.ndarray
    cells: np.ndarray
    cell_tags: np.ndarray | None = None
    facets: np.ndarray | None = None
    facet_markers: np.ndarray | None = None
    _volumes: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if self.cell_tags is None:
            self.cell_tags = np.ones(len(self.cells), dtype=np.int64)
        else:
            self.cell_tags = np.asarray(self.cell_tags, dtype=np.int64)
        if self.facets is None:
            self.facets, self.facet_markers = self._outer_facets()
        else:
            self.facets = np.asarray(self.facets, dtype=np.int64).reshape(-1, self.dim)
            self.facet_markers = np.asarray(self.facet_markers, dtype=np.int64)
        self._orient()

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def _signed_volumes(self):
        p = self.points[self.cells]
        jac = (p[:, 1:, :] - p[:, :1, :]).transpose(0, 2, 1)
        d = self.dim
        return np.linalg.det(jac) / float(np.prod(np.arange(1, d + 1)))

    def _orient(self):
        if self.dim == 1 or len(self.cells) == 0:
            if self.dim == 1 and len(self.cells):
                flip = self.points[self.cells[:, 1], 0] < self.points[self.cells[:, 0], 0]
                self.cells[flip] = self.cells[flip][:, ::-1]
            return
        vol = self._signed_volumes()
        neg = vol < 0
        if np.any(neg):
            self.cells[neg, :2] = self.cells[neg][:, [1, 0]]

    def volumes(self) -> np.ndarray:
        if self._volumes is None:
            if self.dim == 1:
                x = self.points[:, 0]
                self._volumes = np.abs(x[self.cells[:, 1]] - x[self.cells[:, 0]])
            else:
                self._volumes = np.abs(self._signed_volumes())
        return self._volumes

    def centroids(self) -> np.ndarray:
        return self.points[self.cells].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array."""
        pairs = [self.cells[:, [i, j]] for i, j in combinations(range(self.dim + 1), 2)]
        e = np.sort(np.vstack(pairs), axis=1)
        return np.unique(e, axis=0)

    def h(self) -> float:
        """Longest edge length."""
        e = self.edges()
        return float(np.max(np.linalg.norm(self.points[e[:, 1]] - self.points[e[:, 0]], axis=1)))

    def all_facets(self) -> tuple[np.ndarray, np.ndarray]:
        """All facets (sorted vertex tuples) and the number of cells sharing each."""
        d = self.dim
        faces = np.vstack([np.delete(self.cells, i, axis=1) for i in range(d + 1)])
        faces = np.sort(faces, axis=1)
        uniq, counts = np.unique(faces, axis=0, return_counts=True)
        return uniq, counts

    def _outer_facets(self):
        uniq, counts = self.all_facets()
        bnd = uniq[counts == 1]
        return bnd, np.full(len(bnd), int(FacetMarker.OUTER), dtype=np.int64)

    def boundary_facets(self) -> np.ndarray:
        uniq, counts = self.all_facets()
        return uniq[counts == 1]

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_facets())

    def nodes_with_marker(self, marker) -> np.ndarray:
        sel = self.facet_markers == int(marker)
        return np.unique(self.facets[sel])

    def submesh(self, cell_mask) -> tuple["SimplicialMesh", np.ndarray]:
        """Restriction to selected cells.

        Returns the new mesh and the map new vertex index -> old vertex index.
        Facets whose vertices all survive are kept with their markers.
        """
        cells = self.cells[cell_mask]
        used = np.unique(cells)
        renum = -np.ones(self.n_points, dtype=np.int64)
        renum[used] = np.arange(len(used))
        keep = np.all(renum[self.facets] >= 0, axis=1) if len(self.facets) else np.zeros(0, bool)
        sub = SimplicialMesh(
            self.points[used],
            renum[cells],
            self.cell_tags[cell_mask],
            renum[self.facets[keep]],
            self.facet_markers[keep],
        )
        # facets that became exterior boundary of the piece but were not tagged
        bnd = sub.boundary_facets()
        known = {tuple(f) for f in np.sort(sub.facets, axis=1)}
        extra = np.array([f for f in bnd if tuple(f) not in known], dtype=np.int64).reshape(-1, self.dim)
        if len(extra):
            sub.facets = np.vstack([sub.facets, extra])
            sub.facet_markers = np.concatenate(
                [sub.facet_markers, np.full(len(extra), int(FacetMarker.OUTER))]
            )
        return sub, used

    def locate(self, x, candidates=12):
        """Containing cell and barycentric coordinates of each query point.

        Points outside the mesh get cell ``-1``.
        """
        from scipy.spatial import cKDTree

        x = np.atleast_2d(np.asarray(x, float))
        tree = cKDTree(self.centroids())
        k = min(candidates, self.n_cells)
        _, near = tree.query(x, k=k)
        near = np.asarray(near).reshape(len(x), k)
        cell = -np.ones(len(x), dtype=np.int64)
        bary = np.zeros((len(x), self.dim + 1))
        best = np.full(len(x), -np.inf)
        for j in range(k):
            c = near[:, j]
            p = self.points[self.cells[c]]
            T = (p[:, 1:, :] - p[:, :1, :]).transpose(0, 2, 1)
            lam = np.linalg.solve(T, (x - p[:, 0, :])[..., None])[..., 0]
            b = np.column_stack([1 - lam.sum(axis=1), lam])
            score = b.min(axis=1)
            better = score > best
            best[better], cell[better], bary[better] = score[better], c[better], b[better]
        cell[best < -1e-9] = -1
        return cell, bary

    def interpolate(self, values, x, outside=0.0):
        """Evaluate a nodal P1 field at points ``x`` (``outside`` where not covered)."""
        cell, bary = self.locate(x)
        v = np.asarray(values, float)
        out = np.einsum("ij,ij->i", v[self.cells[np.maximum(cell, 0)]], bary)
        out[cell < 0] = outside
        return out

    # --- ASCII exchange format -------------------------------------------------

    def write(self, path) -> None:
        """Write ``path`` in the plain-text mesh format.

        Layout: a header line ``SIMPLICIAL_MESH 1``, a counts line
        ``dim n_points n_cells n_facets``, then one line per vertex
        (coordinates), per cell (vertex ids, phase tag) and per facet
        (vertex ids, marker).
        """
        lines = ["SIMPLICIAL_MESH 1", f"{self.dim} {self.n_points} {self.n_cells} {len(self.facets)}"]
        lines += [" ".join(repr(float(c)) for c in p) for p in self.points]
        lines += [" ".join(map(str, c)) + f" {t}" for c, t in zip(self.cells, self.cell_tags)]
        lines += [" ".join(map(str, f)) + f" {m}" for f, m in zip(self.facets, self.facet_markers)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "SimplicialMesh":
        rows = Path(path).read_text().split("\n")
        if not rows[0].startswith("SIMPLICIAL_MESH"):
            raise ValueError(f"{path}: not a SIMPLICIAL_MESH file")
        dim, npts, ncells, nfac = map(int, rows[1].split())
        body = [r.split() for r in rows[2:] if r.strip()]
        pts = np.array(body[:npts], dtype=float).reshape(npts, dim)
        cel = np.array(body[npts:npts + ncells], dtype=np.int64).reshape(ncells, dim + 2)
        fac = np.array(body[npts + ncells:npts + ncells + nfac], dtype=np.int64).reshape(nfac, dim + 1)
        return cls(pts, cel[:, :-1], cel[:, -1], fac[:, :-1], fac[:, -1])
