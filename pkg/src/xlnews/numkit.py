"""Dense and sparse numerical kernels used by the projection models.

Everything works in float64.  Randomized routines take an explicit seed and
never touch global random state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

log = logging.getLogger(__name__)


class SingularInputError(ValueError):
    pass


@dataclass
class SvdResult:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    objective: list[float] = field(default_factory=list)
    n_iter: int = 0


def _column_sqnorms(X) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=0)).ravel()
    return np.einsum("ij,ij->j", X, X)


def _sqdist(X, xsq, C) -> np.ndarray:
    """Squared Euclidean distances between columns of X (s) and of C (k): s x k."""
    G = np.asarray(X.T @ C)
    d = xsq[:, None] - 2.0 * G + np.einsum("ij,ij->j", C, C)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _column(X, j) -> np.ndarray:
    if sp.issparse(X):
        return X[:, j].toarray().ravel()
    return np.asarray(X[:, j], dtype=np.float64)


def _kmeanspp(X, xsq, k, rng) -> np.ndarray:
    s = X.shape[1]
    C = np.zeros((X.shape[0], k))
    first = int(rng.integers(s))
    C[:, 0] = _column(X, first)
    chosen = {first}
    dmin = _sqdist(X, xsq, C[:, :1]).ravel()
    for c in range(1, k):
        total = dmin.sum()
        if total > 0:
            j = int(rng.choice(s, p=dmin / total))
        else:
            free = np.setdiff1d(np.arange(s), np.fromiter(chosen, int))
            j = int(rng.choice(free))
        chosen.add(j)
        C[:, c] = _column(X, j)
        dmin = np.minimum(dmin, _sqdist(X, xsq, C[:, c:c + 1]).ravel())
    return C


def kmeans(X, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6,
           check_monotone: bool = False) -> KMeansResult:
    """Lloyd's algorithm on the columns of ``X`` (features x samples).

    Seeding is k-means++.  An empty cluster is re-seeded with the point that is
    farthest from its current centroid.  ``objective[t]`` is the sum of squared
    distances after the t-th assignment step; it never increases.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    N, s = X.shape
    if k > s:
        raise ValueError(f"k={k} exceeds the number of points s={s}")
    X = sp.csc_matrix(X, dtype=np.float64) if sp.issparse(X) else np.asarray(X, np.float64)
    rng = np.random.default_rng(seed)
    xsq = _column_sqnorms(X)
    C = _kmeanspp(X, xsq, k, rng)
    res = KMeansResult(C, np.zeros(s, np.int64))
    for it in range(max_iter):
        D = _sqdist(X, xsq, C)
        assign = np.argmin(D, axis=1)
        dist = D[np.arange(s), assign]
        obj = float(dist.sum())
        if check_monotone and res.objective and obj > res.objective[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"k-means objective increased: {res.objective[-1]} -> {obj}")
        res.objective.append(obj)

        counts = np.bincount(assign, minlength=k)
        onehot = sp.csr_matrix((np.ones(s), (np.arange(s), assign)), shape=(s, k))
        sums = (X @ onehot).toarray() if sp.issparse(X) else X @ onehot.toarray()
        newC = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            order = np.argsort(-dist, kind="stable")
            taken = 0
            for c in empty:
                j = int(order[taken])
                taken += 1
                newC[:, c] = _column(X, j)
                assign[j] = c
                dist[j] = 0.0
        shift = float(np.sqrt(np.max(np.einsum("ij,ij->j", newC - C, newC - C))))
        C = newC
        res.assignments = assign
        res.n_iter = it + 1
        if shift < tol:
            break
    res.centroids = C
    return res


def _as_operator(A):
    if isinstance(A, LinearOperator):
        return A
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=np.float64)
    return np.asarray(A, dtype=np.float64)


def _matmat(A, M):
    return np.asarray(A.matmat(M) if isinstance(A, LinearOperator) else A @ M)


def _rmatmat(A, M):
    return np.asarray(A.rmatmat(M) if isinstance(A, LinearOperator) else A.T @ M)


def truncated_svd(A, k: int, oversample: int = 10, power_iters: int = 2,
                  seed: int = 0) -> SvdResult:
    """Rank-``k`` SVD by a randomized range finder with power iterations.

    ``A`` may be a dense array, a scipy sparse matrix or a ``LinearOperator``
    (which then needs ``matmat`` and ``rmatmat``).  The basis is
    re-orthonormalized after every multiplication.
    """
    A = _as_operator(A)
    m, n = A.shape
    ell = k + oversample
    if k <= 0 or oversample < 0 or ell > min(m, n):
        raise ValueError(f"k + oversample = {ell} must be in [1, min(shape) = {min(m, n)}]")
    if power_iters < 0:
        raise ValueError("power_iters must be >= 0")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(_matmat(A, rng.standard_normal((n, ell))))
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(_rmatmat(A, Q))
        Q, _ = np.linalg.qr(_matmat(A, Z))
    Bt = _rmatmat(A, Q)  # n x ell, i.e. (Q^T A)^T
    Vb, s, Ubt = np.linalg.svd(Bt, full_matrices=False)
    U = Q @ Ubt.T[:, :k]
    return SvdResult(U, s[:k].copy(), Vb[:, :k].copy())


def aligned_basis_pinv(B) -> tuple[np.ndarray, bool]:
    """Left pseudoinverse ``(B^T B)^{-1} B^T`` of a tall basis via QR.

    Returns ``(P, degraded)``.  When ``B`` is numerically rank deficient the
    Tikhonov solution ``(R^T R + eps^2 I)^{-1} R^T Q^T`` with
    ``eps = 1e-10 * max|R_ii|`` is returned instead and ``degraded`` is set.
    It is computed from a QR factorization of ``[R; eps I]``, never from the
    squared matrix, and sends directions outside the range of ``B`` to zero.
    """
    B = np.asarray(B, dtype=np.float64)
    n, k = B.shape
    if n < k:
        raise ValueError(f"basis must be tall: got {n} x {k}")
    Q, R = np.linalg.qr(B)
    d = np.abs(np.diag(R))
    dmax = float(d.max()) if d.size else 0.0
    if dmax > 0 and d.min() > 1e-10 * dmax:
        return la.solve_triangular(R, Q.T), False
    eps = 1e-10 * dmax if dmax > 0 else 1e-10
    log.warning("rank-deficient basis (min|R_ii|=%.3g, max=%.3g); ridge fallback", d.min(), dmax)
    Q2, R2 = np.linalg.qr(np.vstack([R, eps * np.eye(k)]))
    # least squares of [R; eps I] P = [Q^T; 0]
    return la.solve_triangular(R2, Q2[:k].T @ Q.T), True


RIDGE_SCHEDULE = (1e-10, 1e-8, 1e-6)


def cholesky_ridge(D, ridge_schedule=RIDGE_SCHEDULE) -> tuple[np.ndarray, float]:
    """Upper-triangular ``K`` with ``D + eps*I = K^T K``; returns ``(K, eps)``.

    Plain Cholesky is tried first; on failure the diagonal is shifted by
    ``r * trace(D) / k`` for each ``r`` of ``ridge_schedule`` in turn.
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("D must be square")
    scale = max(1.0, float(np.abs(D).max(initial=0.0)))
    if np.abs(D - D.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("D is not symmetric")
    D = 0.5 * (D + D.T)
    k = D.shape[0]
    unit = np.trace(D) / k
    for eps in (0.0,) + tuple(r * unit for r in ridge_schedule):
        if eps < 0:
            break
        try:
            L = np.linalg.cholesky(D + eps * np.eye(k) if eps else D)
        except np.linalg.LinAlgError:
            continue
        if eps:
            log.info("cholesky needed ridge %.3g", eps)
        return L.T.copy(), float(eps)
    raise SingularInputError("matrix is not positive definite even after ridging")


def sym_eig(A, top_r: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix, largest eigenvalue first."""
    A = np.asarray(A, dtype=np.float64)
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.abs(A - A.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("A is not symmetric")
    k = A.shape[0]
    top_r = k if top_r is None else top_r
    if not 0 <= top_r <= k:
        raise ValueError(f"top_r={top_r} out of range for a {k} x {k} matrix")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return w[::-1][:top_r].copy(), V[:, ::-1][:, :top_r].copy()


def blocked_gram(A, B, block: int = 256) -> np.ndarray:
    """``A^T B`` computed one column block of ``B`` at a time."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"inner dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    if block <= 0:
        raise ValueError("block must be positive")
    out = np.empty((A.shape[1], B.shape[1]))
    At = np.ascontiguousarray(A.T)
    for lo in range(0, B.shape[1], block):
        out[:, lo:lo + block] = At @ B[:, lo:lo + block]
    return out
