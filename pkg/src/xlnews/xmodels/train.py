"""Training of the four cross-lingual projection models."""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from ..corpus import ComparableCorpus, alignment_index
from ..numkit import aligned_basis_pinv, cholesky_ridge, kmeans, sym_eig, truncated_svd
from .model import LanguageMap, ProjectionModel

log = logging.getLogger(__name__)


def _digests(corpus: ComparableCorpus, idx=None) -> list[int]:
    idx = range(corpus.m) if idx is None else idx
    if corpus.vocabs is None:
        return [0 for _ in idx]
    return [corpus.vocabs[i].digest() for i in idx]


def _vocabs(corpus: ComparableCorpus, idx=None):
    if corpus.vocabs is None:
        return None
    idx = range(corpus.m) if idx is None else idx
    return [corpus.vocabs[i] for i in idx]


def _fix_signs(M: np.ndarray) -> np.ndarray:
    """+1/-1 per column so that each column's largest-magnitude entry is positive."""
    if M.size == 0:
        return np.ones(M.shape[1])
    rows = np.argmax(np.abs(M), axis=0)
    s = np.sign(M[rows, np.arange(M.shape[1])])
    s[s == 0] = 1.0
    return s


def _split_rows(M: np.ndarray, sizes) -> list[np.ndarray]:
    return np.split(M, np.cumsum(sizes)[:-1], axis=0)


def _pinv_maps(basis: np.ndarray, dims) -> tuple[list[LanguageMap], list[bool]]:
    maps, flags = [], []
    for Bi in _split_rows(basis, dims):
        P, degraded = aligned_basis_pinv(Bi)
        maps.append(LanguageMap(P=P))
        flags.append(degraded)
    return maps, flags


def train_kmeans_model(corpus: ComparableCorpus, k: int, seed: int = 0,
                       max_iter: int = 100, tol: float = 1e-6) -> ProjectionModel:
    """Centroids of the stacked, unit-normalized corpus, split by language and
    turned into aligned bases through their pseudoinverses."""
    if k > corpus.s:
        raise ValueError(f"k={k} exceeds the number of multilingual documents {corpus.s}")
    X = corpus.stacked()
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=0)).ravel())
    X = X @ sp.diags(1.0 / np.where(norms > 0, norms, 1.0))
    res = kmeans(X, k, seed=seed, max_iter=max_iter, tol=tol)
    maps, flags = _pinv_maps(res.centroids, corpus.dims)
    model = ProjectionModel("kmeans", list(corpus.langs), maps, {"k": k},
                            {"seed": seed, "max_iter": max_iter, "tol": tol},
                            _digests(corpus), _vocabs(corpus))
    model.diagnostics.update(objective=res.objective, degraded=flags, centroids=res.centroids)
    return model


def _svd_oversample(k: int, shape, oversample: int) -> int:
    return max(0, min(oversample, min(shape) - k))


def train_lsi_model(corpus: ComparableCorpus, k: int, seed: int = 0, oversample: int = 10,
                    power_iters: int = 2) -> ProjectionModel:
    """Truncated SVD of the stacked corpus matrix; each language block of the
    left singular vectors becomes an aligned basis."""
    X = corpus.stacked()
    if k > min(X.shape):
        raise ValueError(f"k={k} exceeds min(N, s) = {min(X.shape)}")
    p = _svd_oversample(k, X.shape, oversample)
    svd = truncated_svd(X, k, p, power_iters, seed)
    U = svd.U * _fix_signs(svd.U)
    maps, flags = _pinv_maps(U, corpus.dims)
    model = ProjectionModel("lsi", list(corpus.langs), maps, {"k": k},
                            {"seed": seed, "oversample": p, "power_iters": power_iters},
                            _digests(corpus), _vocabs(corpus))
    model.diagnostics.update(singular_values=svd.S, degraded=flags)
    return model


# --- CCA / SSCOR -------------------------------------------------------------

def _regularize(D: np.ndarray, kappa: float) -> np.ndarray:
    return (1.0 - kappa) * D + kappa * np.eye(D.shape[0])


def _cov(A: np.ndarray, B: np.ndarray, ca: np.ndarray, cb: np.ndarray) -> np.ndarray:
    """Sample cross-covariance of the columns of A and B around ca, cb."""
    n = A.shape[1]
    if n < 2:
        raise ValueError("need at least two aligned observations")
    return (A - ca[:, None]) @ (B - cb[:, None]).T / (n - 1)


def solve_hub_sscor(D_hub: np.ndarray, D_others: list[np.ndarray],
                    D_cross: list[np.ndarray], k: int) -> dict:
    """Maximize the sum of squared hub correlations under unit-variance
    constraints.

    ``D_hub`` and ``D_others[i]`` are (already regularized) within-language
    covariances, ``D_cross[i]`` the hub-to-language cross-covariances.
    Returns the weights ``W`` (hub first), the unit vectors ``Y`` in the
    whitened coordinates, the matrices ``G``, the eigenvalues and the ridge
    added by each Cholesky factorization.
    """
    K1, e1 = cholesky_ridge(D_hub)
    Ks, eps = [K1], [e1]
    for D in D_others:
        K, e = cholesky_ridge(D)
        Ks.append(K)
        eps.append(e)
    G = []
    for Ki, D1i in zip(Ks[1:], D_cross):
        left = la.solve_triangular(K1, D1i, trans="T")               # K1^{-T} D1i
        G.append(la.solve_triangular(Ki, left.T, trans="T").T)        # ... K_i^{-1}
    S = sum(g @ g.T for g in G)
    vals, Y1 = sym_eig(S, k)
    W = [la.solve_triangular(K1, Y1)]
    Y = [Y1]
    for Ki, g in zip(Ks[1:], G):
        Z = g.T @ Y1
        nz = np.linalg.norm(Z, axis=0)
        Yi = Z / np.where(nz > 0, nz, 1.0)
        Y.append(Yi)
        W.append(la.solve_triangular(Ki, Yi))
    D_used = [D + e * np.eye(D.shape[0]) for D, e in zip([D_hub] + list(D_others), eps)]
    return {"W": W, "Y": Y, "G": G, "eigvals": vals, "ridge": eps, "K": Ks, "D": D_used}


def _correlations(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = A - A.mean(axis=1, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    num = np.einsum("ij,ij->i", A, B)
    den = np.sqrt(np.einsum("ij,ij->i", A, A) * np.einsum("ij,ij->i", B, B))
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def train_cca_model(corpus: ComparableCorpus, k: int, kappa: float = 0.1,
                    langs: tuple[str, str] | None = None) -> ProjectionModel:
    """Regularized two-view CCA in the full term spaces.

    Solved by the same Cholesky/eigenvalue route as hub CCA with two
    languages.  ``diagnostics['correlations']`` holds the sample correlations
    of the projected aligned training documents.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    if langs is None:
        if corpus.m != 2:
            raise ValueError("CCA needs exactly two languages; pass langs=")
        langs = tuple(corpus.langs)
    c2 = corpus.subset(np.arange(corpus.s), list(langs))
    if c2.s < k + 1:
        raise ValueError(f"CCA needs at least k+1 = {k + 1} aligned documents, got {c2.s}")
    X1, X2 = c2.X[0].toarray(), c2.X[1].toarray()
    m1, m2 = X1.mean(axis=1), X2.mean(axis=1)
    D11 = _regularize(_cov(X1, X1, m1, m1), kappa)
    D22 = _regularize(_cov(X2, X2, m2, m2), kappa)
    D12 = _cov(X1, X2, m1, m2)
    k = min(k, D11.shape[0], D22.shape[0])
    sol = solve_hub_sscor(D11, [D22], [D12], k)
    W1, W2 = sol["W"]
    sign = _fix_signs(W1)
    W1, W2 = W1 * sign, W2 * sign
    sol["W"], sol["Y"] = [W1, W2], [y * sign for y in sol["Y"]]
    maps = [LanguageMap(P=np.ascontiguousarray(W1.T)), LanguageMap(P=np.ascontiguousarray(W2.T))]
    model = ProjectionModel("cca", list(c2.langs), maps, {"k": k}, {"kappa": kappa},
                            _digests(c2), _vocabs(c2))
    model.diagnostics.update(sol, correlations=_correlations(W1.T @ X1, W2.T @ X2))
    return model


class _HubCrossCovariance(LinearOperator):
    """``[C_12 ... C_1m]`` as an operator, never formed densely."""

    def __init__(self, X1: sp.csc_matrix, c1: np.ndarray, blocks):
        # blocks: (hub-aligned columns, X_j, c_j) per non-hub language
        self.c1 = c1
        self.blocks = [(X1[:, cols].tocsr(), Xj[:, cols].tocsr(), cj, len(cols) - 1)
                       for cols, Xj, cj in blocks]
        self.sizes = [Xj.shape[0] for _, Xj, _ in blocks]
        super().__init__(np.float64, (X1.shape[0], sum(self.sizes)))

    def _matmat(self, M):
        out = np.zeros((self.shape[0], M.shape[1]))
        for (X1a, Xja, cj, dof), Mj in zip(self.blocks, _split_rows(M, self.sizes)):
            u = np.asarray(Xja.T @ Mj) - (cj @ Mj)[None, :]          # (X_j - c_j)^T M
            out += (np.asarray(X1a @ u) - np.outer(self.c1, u.sum(axis=0))) / dof
        return out

    def _matvec(self, v):
        return self._matmat(v.reshape(-1, 1)).ravel()

    def _rmatmat(self, M):
        parts = []
        for X1a, Xja, cj, dof in self.blocks:
            u = np.asarray(X1a.T @ M) - (self.c1 @ M)[None, :]       # (X_1 - c_1)^T M
            parts.append((np.asarray(Xja @ u) - np.outer(cj, u.sum(axis=0))) / dof)
        return np.vstack(parts)

    def _rmatvec(self, v):
        return self._rmatmat(v.reshape(-1, 1)).ravel()


def _column_means(X: sp.csc_matrix, cols: np.ndarray) -> np.ndarray:
    return np.asarray(X[:, cols].mean(axis=1)).ravel()


def train_hubcca_model(corpus: ComparableCorpus, hub: int = 0, k_lsi: int = 500,
                       k_cca: int | None = None, kappa: float = 0.1, seed: int = 0,
                       oversample: int = 10, power_iters: int = 2,
                       step2_columns: str = "all") -> ProjectionModel:
    """Hub-language CCA.

    Step 1 reduces every language with a truncated SVD of the hub
    cross-covariance blocks ``[C_1,2 ... C_1,m]``.  Step 2 maximizes the sum
    of squared hub correlations in the reduced spaces, which reduces to a
    symmetric eigenproblem.  Languages without hub-aligned documents are left
    out of the model.  ``step2_columns`` selects which columns estimate the
    within-language covariances: ``all`` (every document of the language) or
    ``hub`` (only hub-aligned ones).
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    if step2_columns not in ("all", "hub"):
        raise ValueError("step2_columns must be 'all' or 'hub'")
    k_cca = k_lsi if k_cca is None else k_cca
    if k_cca > k_lsi:
        raise ValueError("k_cca must not exceed k_lsi")
    order = [hub] + [i for i in range(corpus.m) if i != hub]
    idx = alignment_index(corpus)
    used = [hub]
    excluded = []
    for i in order[1:]:
        if idx.pair(hub, i).size >= 2:
            used.append(i)
        else:
            log.warning("language %s has no usable hub alignment; excluded", corpus.langs[i])
            excluded.append(corpus.langs[i])
    if len(used) < 2:
        raise ValueError("hub CCA needs at least one language aligned with the hub")
    X = [corpus.X[i] for i in used]
    means = [_column_means(corpus.X[i], idx.a_single[i]) for i in used]

    # Step 1
    blocks = [(idx.pair(hub, i), Xi, ci) for i, Xi, ci in zip(used[1:], X[1:], means[1:])]
    C = _HubCrossCovariance(X[0], means[0], blocks)
    if k_lsi > min(C.shape):
        raise ValueError(f"k_lsi={k_lsi} exceeds the cross-covariance rank bound {min(C.shape)}")
    p = _svd_oversample(k_lsi, C.shape, oversample)
    svd = truncated_svd(C, k_lsi, p, power_iters, seed)
    flip = _fix_signs(svd.U)
    V = [svd.U * flip] + [Vj * flip for Vj in _split_rows(svd.V, C.sizes)]

    # Step 2, in the reduced spaces
    Y = [np.asarray((Xi.T @ Vi).T) for Xi, Vi in zip(X, V)]
    D_diag = []
    for pos, i in enumerate(used):
        cols = idx.a_single[i] if step2_columns == "all" else (
            idx.a_single[hub] if pos == 0 else idx.pair(hub, i))
        mu = Y[pos][:, cols].mean(axis=1)
        D_diag.append(_regularize(_cov(Y[pos][:, cols], Y[pos][:, cols], mu, mu), kappa))
    reduced_means = [Vi.T @ ci for Vi, ci in zip(V, means)]
    D_cross = []
    for pos, i in enumerate(used[1:], start=1):
        cols = idx.pair(hub, i)
        D_cross.append(_cov(Y[0][:, cols], Y[pos][:, cols], reduced_means[0], reduced_means[pos]))
    sol = solve_hub_sscor(D_diag[0], D_diag[1:], D_cross, k_cca)
    sign = _fix_signs(V[0] @ sol["W"][0])
    W = [w * sign for w in sol["W"]]
    sol["W"], sol["Y"] = W, [y * sign for y in sol["Y"]]

    langs = [corpus.langs[i] for i in used]
    maps = [LanguageMap(V=np.ascontiguousarray(Vi), W=np.ascontiguousarray(Wi))
            for Vi, Wi in zip(V, W)]
    model = ProjectionModel(
        "hubcca", langs, maps, {"k_lsi": k_lsi, "k_cca": k_cca},
        {"kappa": kappa, "seed": seed, "oversample": p, "power_iters": power_iters,
         "step2_columns": step2_columns, "hub": corpus.langs[hub]},
        _digests(corpus, used), _vocabs(corpus, used))
    corr = [_correlations(W[0].T @ Y[0][:, idx.pair(hub, i)], W[pos].T @ Y[pos][:, idx.pair(hub, i)])
            for pos, i in enumerate(used[1:], start=1)]
    model.diagnostics.update(sol, excluded=excluded, singular_values=svd.S,
                             correlations=corr, D_cross=D_cross)
    return model
