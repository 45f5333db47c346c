"""Trained projection models and everything that only needs a trained model:
projection into the shared space, cross-lingual similarity and exact blocked
k-nearest-neighbour search."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..numkit import blocked_gram
from ..textvec import SparseVector, Vocabulary, stack_columns

METHODS = ("kmeans", "lsi", "cca", "hubcca")


@dataclass
class LanguageMap:
    """Linear map of one language into the shared space.

    Either a single ``P`` (k x n) or, for hub CCA, the pair ``V`` (n x k_lsi)
    and ``W`` (k_lsi x k_cca) with ``x -> W^T V^T x``.
    """

    P: np.ndarray | None = None
    V: np.ndarray | None = None
    W: np.ndarray | None = None

    def __post_init__(self):
        if (self.P is None) == (self.V is None or self.W is None):
            raise ValueError("give either P or both V and W")
        # one memory layout, so a loaded model multiplies exactly like the trained one
        for name in ("P", "V", "W"):
            M = getattr(self, name)
            if M is not None:
                setattr(self, name, np.ascontiguousarray(M, dtype=np.float64))

    @property
    def n_in(self) -> int:
        return self.P.shape[1] if self.P is not None else self.V.shape[0]

    @property
    def n_out(self) -> int:
        return self.P.shape[0] if self.P is not None else self.W.shape[1]

    def matrices(self) -> list[np.ndarray]:
        return [self.P] if self.P is not None else [self.V, self.W]

    def composed(self) -> np.ndarray:
        """The full k x n matrix of the map."""
        return self.P if self.P is not None else self.W.T @ self.V.T

    def apply(self, X) -> np.ndarray:
        """Map the columns of ``X`` (n x s, dense or sparse)."""
        if self.P is not None:
            if sp.issparse(X):
                return np.asarray((X.T @ self.P.T).T)
            return self.P @ X
        R = np.asarray((X.T @ self.V).T) if sp.issparse(X) else self.V.T @ X
        return self.W.T @ R


@dataclass
class ProjectionModel:
    method: str
    langs: list[str]
    maps: list[LanguageMap]
    dims: dict[str, int]
    config: dict = field(default_factory=dict)
    vocab_digests: list[int] = field(default_factory=list)
    vocabs: list[Vocabulary] | None = field(default=None, repr=False, compare=False)
    diagnostics: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if len(self.maps) != len(self.langs):
            raise ValueError("one map per language required")
        outs = {mp.n_out for mp in self.maps}
        if len(outs) > 1:
            raise ValueError(f"maps disagree on the shared dimension: {sorted(outs)}")
        if not self.vocab_digests:
            self.vocab_digests = [0] * len(self.langs)

    @property
    def k(self) -> int:
        return self.maps[0].n_out

    def lang_index(self, lang: str) -> int:
        try:
            return self.langs.index(lang)
        except ValueError:
            raise KeyError(f"language {lang!r} is not covered by this model") from None

    def map_for(self, lang: str) -> LanguageMap:
        return self.maps[self.lang_index(lang)]


def _as_columns(v, n: int):
    if isinstance(v, SparseVector):
        if v.dim != n:
            raise ValueError(f"vector has dim {v.dim}, language space has {n}")
        return stack_columns([v], n)
    if isinstance(v, (list, tuple)) and v and isinstance(v[0], SparseVector):
        return stack_columns(list(v), n)
    if sp.issparse(v):
        X = sp.csc_matrix(v)
    else:
        X = np.asarray(v, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
    if X.shape[0] != n:
        raise ValueError(f"input has {X.shape[0]} rows, language space has {n}")
    return X


def project(model: ProjectionModel, lang: str, v) -> np.ndarray:
    """Image of ``v`` in the shared space.

    A single vector (``SparseVector`` or 1-d array) gives a 1-d result; a
    matrix or list of vectors gives one column per input.  No centering is
    applied.
    """
    mp = model.map_for(lang)
    single = isinstance(v, SparseVector) or (not sp.issparse(v) and np.ndim(v) == 1
                                             and not isinstance(v, (list, tuple)))
    Z = mp.apply(_as_columns(v, mp.n_in))
    return Z[:, 0] if single else Z


def normalize_columns(Z: np.ndarray) -> np.ndarray:
    n = np.sqrt(np.einsum("ij,ij->j", Z, Z))
    return Z / np.where(n > 0, n, 1.0)


def _norm(v) -> float:
    if isinstance(v, SparseVector):
        return v.norm()
    if sp.issparse(v):
        return float(sp.linalg.norm(v))
    return float(np.linalg.norm(v))


def similarity(model: ProjectionModel, lang_i: str, v_i, lang_j: str, v_j,
               mode: str = "cosine") -> float:
    """Cross-lingual similarity of two documents.

    ``cosine`` (default) compares the projected vectors; ``input_norm`` divides the
    inner product of the projections by the norms of the inputs, which is only
    guaranteed to lie in [-1, 1] when the composed operator is a contraction.
    """
    zi, zj = project(model, lang_i, v_i), project(model, lang_j, v_j)
    if mode == "cosine":
        ni, nj = np.linalg.norm(zi), np.linalg.norm(zj)
        if ni == 0 or nj == 0:
            return 0.0
        return float(np.clip(zi @ zj / (ni * nj), -1.0, 1.0))
    if mode == "input_norm":
        ni, nj = _norm(v_i), _norm(v_j)
        if ni == 0 or nj == 0:
            return 0.0
        return float(zi @ zj / (ni * nj))
    raise ValueError(f"unknown similarity mode {mode!r}")


@dataclass
class ProxyCache:
    """Per ordered language pair, the k x k matrix inserted between the two
    normalized projections.  Every model here projects into one shared space,
    so each entry is the identity; batch scoring skips the multiply for
    identity entries."""

    langs: list[str]
    matrices: dict[tuple[str, str], np.ndarray]

    def get(self, lang_i: str, lang_j: str) -> np.ndarray:
        return self.matrices[(lang_i, lang_j)]

    def is_identity(self, lang_i: str, lang_j: str) -> bool:
        M = self.matrices[(lang_i, lang_j)]
        return bool(np.array_equal(M, np.eye(M.shape[0])))


def build_proxy_cache(model: ProjectionModel) -> ProxyCache:
    eye = np.eye(model.k)
    mats = {(a, b): eye.copy() for a in model.langs for b in model.langs}
    return ProxyCache(list(model.langs), mats)


def pair_scores(model: ProjectionModel, lang_i: str, Xi, lang_j: str, Xj,
                proxies: ProxyCache | None = None, block: int = 1024) -> np.ndarray:
    """Dense matrix of default-mode similarities between two collections."""
    Zi = normalize_columns(project(model, lang_i, _as_columns(Xi, model.map_for(lang_i).n_in)))
    Zj = normalize_columns(project(model, lang_j, _as_columns(Xj, model.map_for(lang_j).n_in)))
    if proxies is not None and not proxies.is_identity(lang_i, lang_j):
        Zj = proxies.get(lang_i, lang_j) @ Zj
    return blocked_gram(Zi, Zj, block)


@dataclass
class KnnResult:
    indices: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]

    def row(self, q: int) -> list[tuple[int, float]]:
        return [(int(i), float(s)) for i, s in zip(self.indices[q], self.scores[q])]


def _select_topk(cand_scores: np.ndarray, cand_idx: np.ndarray, k: int):
    """Top ``k`` per row by score, ties to the lower index.  ``cand_idx`` must
    increase along each row; the selection keeps that order."""
    kth = -np.partition(-cand_scores, k - 1, axis=1)[:, k - 1]
    gt = cand_scores > kth[:, None]
    eq = cand_scores == kth[:, None]
    need = k - gt.sum(axis=1)
    select = gt | (eq & (np.cumsum(eq, axis=1) <= need[:, None]))
    q = cand_scores.shape[0]
    return cand_scores[select].reshape(q, k), cand_idx[select].reshape(q, k)


def topk_blocked(Zq: np.ndarray, Zt: np.ndarray, k_nn: int, block: int = 1024) -> KnnResult:
    """Exact top-``k_nn`` inner products of the columns of ``Zq`` against the
    columns of ``Zt``, scanning ``Zt`` in column blocks."""
    if k_nn < 1:
        raise ValueError("k_nn must be >= 1")
    nq, nt = Zq.shape[1], Zt.shape[1]
    if nq == 0 or nt == 0:
        raise ValueError("query and target collections must be nonempty")
    k = min(k_nn, nt)
    Qt = np.ascontiguousarray(Zq.T)
    best_s = np.empty((nq, 0))
    best_i = np.empty((nq, 0), np.int64)
    for lo in range(0, nt, block):
        S = Qt @ Zt[:, lo:lo + block]
        idx = np.broadcast_to(np.arange(lo, lo + S.shape[1]), S.shape)
        cs = np.concatenate([best_s, S], axis=1)
        ci = np.concatenate([best_i, idx], axis=1)
        best_s, best_i = _select_topk(cs, ci, min(k, cs.shape[1]))
    order = np.argsort(-best_s, axis=1, kind="stable")
    return KnnResult(np.take_along_axis(best_i, order, 1), np.take_along_axis(best_s, order, 1))


def knn_search(model: ProjectionModel, lang_i: str, queries, lang_j: str, targets,
               k_nn: int = 10, block: int = 1024) -> KnnResult:
    """For every query document, the ``k_nn`` most similar target documents."""
    Zq = normalize_columns(project(model, lang_i, _as_columns(queries, model.map_for(lang_i).n_in)))
    Zt = normalize_columns(project(model, lang_j, _as_columns(targets, model.map_for(lang_j).n_in)))
    return topk_blocked(Zq, Zt, k_nn, block)


def project_collection(model: ProjectionModel, lang: str, X: Sequence[SparseVector] | sp.spmatrix):
    """Normalized projections of a collection, ready for :func:`topk_blocked`."""
    return normalize_columns(project(model, lang, _as_columns(X, model.map_for(lang).n_in)))
