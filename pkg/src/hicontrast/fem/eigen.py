"""Shift-and-invert solver for the symmetric pencil K v = lambda M v."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hicontrast.errors import ConvergenceError, FactorizationError
from hicontrast.fem.assembly import SymmetricForm

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
ARPACK_TOL = 1e-12
REFINE_SWEEPS = 3
DENSE_LIMIT = 400
SEED = 20240521


@dataclass
class EigenPair:
    """Eigenvalue with an M-normalized eigenvector (v^T M v = 1)."""

    eigenvalue: float
    eigenvector: np.ndarray
    residual: float = 0.0


def _as_matrix(A):
    if isinstance(A, SymmetricForm):
        return A.reduced()
    return sp.csr_matrix(A)


def factorize(A):
    """Sparse LU of a (possibly indefinite) symmetric matrix.

    Raises :class:`FactorizationError` when the matrix is numerically singular.
    """
    A = sp.csc_matrix(A)
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise FactorizationError(f"factorization failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    if diag.size and diag.min() <= 1e-14 * diag.max():
        raise FactorizationError("shifted matrix numerically singular; perturb the shift")
    return lu


def eig_shift_invert(K, M, sigma, k=1, tol=RESIDUAL_TOL, maxiter=None, ncv=None):
    """The ``k`` eigenpairs of ``K v = lambda M v`` nearest ``sigma``.

    ``K`` and ``M`` are :class:`SymmetricForm` (constraints applied) or
    sparse matrices. Pairs are returned ordered by ``|lambda - sigma|``,
    eigenvectors in the reduced (free-DOF) numbering.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    Kr, Mr = _as_matrix(K), _as_matrix(M)
    n = Kr.shape[0]
    k = min(k, n)
    if n <= DENSE_LIMIT or k >= n - 1:
        w, V = sla.eigh(Kr.toarray(), Mr.toarray())
    else:
        w, V = _arnoldi(Kr, Mr, sigma, k, tol, maxiter, ncv)
        if np.any(_residuals(Kr, Mr, w, V) > tol) and k < n - 2:
            # a pair almost on the shift degrades the others; retry about an offset shift
            offset = 1e-4 * max(float(np.max(np.abs(w - sigma))), 1e-12)
            w, V = _arnoldi(Kr, Mr, sigma - offset, k + 1, tol, maxiter, ncv)
    order = np.argsort(np.abs(w - sigma), kind="stable")[:k]
    w, V = w[order], V[:, order]
    norms = np.sqrt(np.einsum("ij,ij->j", V, Mr @ V))
    V = V / norms
    pivot = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivot, np.arange(V.shape[1])])
    res = _residuals(Kr, Mr, w, V)
    if np.any(res > tol):
        raise ConvergenceError(
            f"eigen-residual {res.max():.2e} exceeds tolerance {tol:.0e}", residual=float(res.max())
        )
    return [EigenPair(float(lam), V[:, i].copy(), float(r)) for i, (lam, r) in enumerate(zip(w, res))]


def count_below(K, M, s) -> int:
    """Number of eigenvalues of ``K v = lambda M v`` below ``s`` (Sylvester inertia).

    Uses a symmetric LU with diagonal pivoting, so ``P (K - s M) P^T = L D L^T``
    and the count is the number of negative entries of ``D``.
    """
    A = sp.csc_matrix(_as_matrix(K) - s * _as_matrix(M))
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise FactorizationError(f"factorization at {s} failed: {exc}; perturb the shift") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationError("pivoting broke symmetry; inertia unavailable")
    return int(np.count_nonzero(lu.U.diagonal() < 0))


def eig_in_window(K, M, sigma, halfwidth, k=6, tol=RESIDUAL_TOL, locate_tol=1e-6, maxiter=None, ncv=None):
    """All eigenpairs with ``|lambda - sigma| < halfwidth`` (at most ``k`` of them).

    The window is sliced by Sylvester inertia at its two ends, so the count is
    exact; only that many pairs are requested from ARPACK.  Asking for pairs
    outside the window would force ARPACK to resolve the dense band-edge and
    resonance clusters of high-contrast problems, which stalls it.  Returns
    ``(pairs, clipped)``; ``clipped`` is true when the window holds more than
    ``k`` eigenvalues and only the ``k`` nearest ``sigma`` are returned.
    """
    Kr, Mr = _as_matrix(K), _as_matrix(M)
    count = count_below(Kr, Mr, sigma + halfwidth) - count_below(Kr, Mr, sigma - halfwidth)
    clipped = count > k
    count = min(count, k)
    if count == 0:
        return [], clipped
    n = Kr.shape[0]
    if n <= DENSE_LIMIT or count >= n - 1:
        return eig_shift_invert(Kr, Mr, sigma, count, tol), clipped
    lu = factorize(Kr - sigma * Mr)
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(SEED).standard_normal(n)
    ncv = ncv or min(n - 1, max(2 * count + 1, 20))
    try:
        w, V = spla.eigsh(Kr, k=count, M=Mr, sigma=sigma, OPinv=op, which="LM",
                          tol=locate_tol, maxiter=maxiter, ncv=ncv, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"shift-invert did not converge ({len(exc.eigenvalues)}/{count} pairs)") from exc
    for _ in range(10):
        if np.all(_residuals(Kr, Mr, w, V) <= 0.1 * tol):
            break
        w, V = _refine(Kr, Mr, lu, w, V, 0.1 * tol)
    order = np.argsort(w, kind="stable")
    w, V = w[order], V[:, order]
    V = V / np.sqrt(np.einsum("ij,ij->j", V, Mr @ V))
    pivot = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pivot, np.arange(V.shape[1])])
    res = _residuals(Kr, Mr, w, V)
    if np.any(res > tol):
        raise ConvergenceError(
            f"eigen-residual {res.max():.2e} exceeds tolerance {tol:.0e}", residual=float(res.max())
        )
    if not clipped and np.any(np.abs(w - sigma) >= halfwidth):
        raise ConvergenceError("located pairs disagree with the inertia count of the window")
    return [EigenPair(float(lam), V[:, i].copy(), float(r)) for i, (lam, r) in enumerate(zip(w, res))], clipped


def _arnoldi(Kr, Mr, sigma, k, tol, maxiter, ncv):
    n = Kr.shape[0]
    lu = factorize(Kr - sigma * Mr)
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(SEED).standard_normal(n)  # fixed start: reproducible output
    if ncv is None:
        ncv = min(n - 1, max(2 * k + 1, 20))
    try:
        w, V = spla.eigsh(Kr, k=k, M=Mr, sigma=sigma, OPinv=op, which="LM",
                          tol=ARPACK_TOL, maxiter=maxiter, ncv=ncv, v0=v0)
    except spla.ArpackNoConvergence as exc:
        w, V = exc.eigenvalues, exc.eigenvectors
        if len(w) == 0:
            raise ConvergenceError("ARPACK returned no converged pairs") from exc
        res = _residuals(Kr, Mr, w, V)
        raise ConvergenceError(
            f"shift-invert did not converge ({len(w)}/{k} pairs)", residual=float(res.max())
        ) from exc
    return _refine(Kr, Mr, lu, w, V, tol)


def _refine(K, M, lu, w, V, tol):
    """Block inverse iteration with Rayleigh-Ritz; keeps the best sweep."""
    best = (np.max(_residuals(K, M, w, V)), w, V)
    for _ in range(REFINE_SWEEPS):
        if best[0] <= 0.1 * tol:
            break
        Q, _ = np.linalg.qr(lu.solve(np.asarray(M @ best[2])))
        Kp, Mp = Q.T @ (K @ Q), Q.T @ (M @ Q)
        wn, Y = sla.eigh(0.5 * (Kp + Kp.T), 0.5 * (Mp + Mp.T))
        Vn = Q @ Y
        rn = np.max(_residuals(K, M, wn, Vn))
        if rn >= best[0]:
            break
        best = (rn, wn, Vn)
    return best[1], best[2]


def _residuals(K, M, w, V):
    MV = M @ V
    R = K @ V - MV * w
    return np.linalg.norm(R, axis=0) / np.maximum(np.maximum(np.abs(w), 1.0) * np.linalg.norm(MV, axis=0), 1e-300)
