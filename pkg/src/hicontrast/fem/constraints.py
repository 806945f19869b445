"""Periodic identification and Dirichlet elimination of degrees of freedom."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from hicontrast.errors import PeriodicMatchError
from hicontrast.fem.assembly import ConstraintMap

MATCH_TOL = 1e-10


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def periodic_masters(points, lower=0.0, upper=1.0, tol=MATCH_TOL, nodes=None):
    """Master index of every vertex under identification of opposite faces.

    Parameters
    ----------
    points : (N, d) array
    lower, upper : scalar or length-d bounds of the periodicity box
    nodes : optional subset of vertex ids to consider (e.g. the vertices of
        one phase); others are left alone.
    """
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    lo = np.broadcast_to(np.asarray(lower, float), (d,))
    hi = np.broadcast_to(np.asarray(upper, float), (d,))
    cand = np.arange(n) if nodes is None else np.asarray(nodes)
    parent = np.arange(n)
    unmatched = []
    for k in range(d):
        on_lo = cand[np.abs(points[cand, k] - lo[k]) < tol]
        on_hi = cand[np.abs(points[cand, k] - hi[k]) < tol]
        if len(on_hi) == 0 and len(on_lo) == 0:
            continue
        shifted = points[on_hi].copy()
        shifted[:, k] = lo[k]
        tree = cKDTree(points[on_lo]) if len(on_lo) else None
        if tree is None:
            unmatched.extend(points[on_hi])
            continue
        dist, idx = tree.query(shifted)
        bad = dist > tol
        unmatched.extend(points[on_hi[bad]])
        if len(on_lo) != len(on_hi):
            # lower-face vertices without partner
            tree_hi = cKDTree(shifted)
            dlo, _ = tree_hi.query(points[on_lo])
            unmatched.extend(points[on_lo[dlo > tol]])
        for s, m in zip(on_hi[~bad], on_lo[idx[~bad]]):
            rs, rm = _find(parent, s), _find(parent, m)
            if rs != rm:
                parent[max(rs, rm)] = min(rs, rm)
    if unmatched:
        raise PeriodicMatchError(np.array(unmatched))
    return np.array([_find(parent, i) for i in range(n)])


def periodic_identify(mesh, lower=0.0, upper=1.0, tol=MATCH_TOL, nodes=None) -> ConstraintMap:
    """Constraint map identifying matching vertices on opposite faces of the cell.

    Only vertices actually used by the mesh get a free DOF; raises
    :class:`PeriodicMatchError` listing coordinates of unmatched vertices.
    """
    masters = periodic_masters(mesh.points, lower, upper, tol, nodes)
    return _prolongation(masters, np.unique(mesh.cells))


def _prolongation(masters, used):
    n = len(masters)
    is_used = np.zeros(n, bool)
    is_used[used] = True
    reps = np.unique(masters[used])
    col = -np.ones(n, dtype=np.int64)
    col[reps] = np.arange(len(reps))
    rows = np.flatnonzero(is_used)
    cols = col[masters[rows]]
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, len(reps)))
    return ConstraintMap(P)


def dirichlet_elimination(n, fixed, used=None) -> ConstraintMap:
    """Constraint map keeping all DOFs except ``fixed`` (set to zero).

    ``used`` optionally restricts the kept DOFs to those vertices (so that
    orphan vertices of a sub-assembly do not produce empty rows).
    """
    keep = np.ones(n, bool)
    keep[np.asarray(fixed, dtype=np.int64)] = False
    if used is not None:
        mask = np.zeros(n, bool)
        mask[used] = True
        keep &= mask
    free = np.flatnonzero(keep)
    P = sp.csr_matrix((np.ones(len(free)), (free, np.arange(len(free)))), shape=(n, len(free)))
    return ConstraintMap(P)


def quotient_euler_characteristic(mesh, constraint: ConstraintMap) -> int:
    """V - E + F (+ ... in 3D) of the complex after identification."""
    P = constraint.prolong.tocoo()
    col = -np.ones(constraint.n_full, dtype=np.int64)
    col[P.row] = P.col
    cells = col[mesh.cells]
    from itertools import combinations

    d = mesh.dim
    chi = constraint.n_free
    sign = -1
    for size in range(2, d + 2):
        faces = np.vstack([cells[:, list(c)] for c in combinations(range(d + 1), size)])
        # faces are identified if their vertex images agree as translates; on a
        # quotient of a conforming periodic mesh this is the sorted image tuple
        # paired with the original face geometry modulo the lattice
        faces_geo = np.vstack(
            [mesh.points[mesh.cells[:, list(c)]].mean(axis=1) for c in combinations(range(d + 1), size)]
        )
        key = np.round(np.mod(faces_geo, 1.0) * 1e8).astype(np.int64) % 100000000
        count = len(np.unique(np.hstack([np.sort(faces, axis=1), key]), axis=0))
        chi += sign * count
        sign = -sign
    return int(chi)
