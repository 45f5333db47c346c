"""TFIDF vector-space representation of pre-tokenized documents.

Documents arrive as token lists (see :func:`tokenize` for the bundled
convenience splitter).  Weights are ``tf * ln(N / df)``; the IDF statistics
come either from a static :class:`Vocabulary` or from a
:class:`SlidingIdfState` that tracks a time window over a stream.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

SECONDS_PER_DAY = 86400

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    id: str
    lang: str
    tokens: tuple[str, ...]
    timestamp: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be nonempty")
        if not self.lang:
            raise ValueError(f"document {self.id!r} has an empty language code")
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def to_json(self) -> str:
        obj = {"id": self.id, "lang": self.lang, "tokens": list(self.tokens)}
        if self.timestamp is not None:
            obj["timestamp"] = int(self.timestamp)
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "Document":
        obj = json.loads(line)
        ts = obj.get("timestamp")
        return cls(str(obj["id"]), str(obj["lang"]), tuple(obj.get("tokens", ())),
                   None if ts is None else int(ts))


def read_documents(path: str | Path) -> Iterator[Document]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield Document.from_json(line)


def write_documents(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(doc.to_json() + "\n")


@dataclass(frozen=True)
class SparseVector:
    """Sparse vector with strictly increasing indices and nonzero values."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing and < dim")
            if not np.all(np.isfinite(val)):
                raise ValueError("values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def zeros(cls, dim: int) -> "SparseVector":
        return cls(dim, np.zeros(0, np.int64), np.zeros(0))

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64).ravel()
        (nz,) = np.nonzero(x)
        return cls(x.size, nz, x[nz])

    @classmethod
    def from_pairs(cls, dim: int, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        acc: dict[int, float] = {}
        for i, v in pairs:
            acc[int(i)] = acc.get(int(i), 0.0) + float(v)
        keys = sorted(k for k, v in acc.items() if v != 0.0)
        return cls(dim, np.array(keys, np.int64), np.array([acc[k] for k in keys]))

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def scaled(self, factor: float) -> "SparseVector":
        if factor == 0.0:
            return SparseVector.zeros(self.dim)
        return SparseVector(self.dim, self.indices, self.values * factor)

    def normalized(self) -> "SparseVector":
        n = self.norm()
        return self if n == 0.0 else SparseVector(self.dim, self.indices, self.values / n)

    def dot(self, other: "SparseVector") -> float:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        _, ia, ib = np.intersect1d(self.indices, other.indices,
                                   assume_unique=True, return_indices=True)
        return float(np.dot(self.values[ia], other.values[ib]))


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    c = a.dot(b) / (na * nb)
    return min(1.0, max(-1.0, c))


def stack_columns(vectors: Sequence[SparseVector], dim: int | None = None) -> sp.csc_matrix:
    """Stack sparse vectors as the columns of a ``dim x len(vectors)`` CSC matrix."""
    if dim is None:
        if not vectors:
            raise ValueError("cannot infer dimension of an empty collection")
        dim = vectors[0].dim
    indptr = np.zeros(len(vectors) + 1, np.int64)
    for j, v in enumerate(vectors):
        if v.dim != dim:
            raise ValueError(f"column {j} has dim {v.dim}, expected {dim}")
        indptr[j + 1] = indptr[j] + v.nnz
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return sp.csc_matrix((data, indices, indptr), shape=(dim, len(vectors)))


def column_vector(X: sp.spmatrix, j: int) -> SparseVector:
    X = sp.csc_matrix(X)
    lo, hi = X.indptr[j], X.indptr[j + 1]
    order = np.argsort(X.indices[lo:hi])
    return SparseVector(X.shape[0], X.indices[lo:hi][order], X.data[lo:hi][order])


@dataclass
class Vocabulary:
    lang: str
    term_to_index: dict[str, int]
    df: np.ndarray
    n_docs: int

    def __post_init__(self):
        self.df = np.asarray(self.df, dtype=np.int64)
        if len(self.df) != len(self.term_to_index):
            raise ValueError("df length must equal vocabulary size")
        if sorted(self.term_to_index.values()) != list(range(len(self.term_to_index))):
            raise ValueError("term indices must be a bijection onto [0, n)")
        if self.df.size and (self.df.min() < 1 or self.df.max() > self.n_docs):
            raise ValueError("document frequencies must lie in [1, n_docs]")

    def __len__(self) -> int:
        return len(self.term_to_index)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_index

    @property
    def terms(self) -> list[str]:
        out = [""] * len(self)
        for t, i in self.term_to_index.items():
            out[i] = t
        return out

    def idf(self) -> np.ndarray:
        return np.log(self.n_docs / self.df)

    def digest(self) -> int:
        """64-bit fingerprint of the index map, stored in model containers."""
        h = hashlib.sha256()
        h.update(self.lang.encode())
        for t in self.terms:
            h.update(b"\0" + t.encode())
        return int.from_bytes(h.digest()[:8], "little")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#n_docs={self.n_docs}\n")
            for i, t in enumerate(self.terms):
                fh.write(f"{t}\t{i}\t{self.df[i]}\n")

    @classmethod
    def load(cls, path: str | Path, lang: str) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if not header.startswith("#n_docs="):
                raise ValueError(f"{path}: missing '#n_docs=' header")
            n_docs = int(header.split("=", 1)[1])
            t2i, dfs = {}, []
            for line in fh:
                if not line.strip():
                    continue
                term, idx, df = line.rstrip("\n").split("\t")
                t2i[term] = int(idx)
                dfs.append((int(idx), int(df)))
        df = np.zeros(len(dfs), np.int64)
        for i, d in dfs:
            df[i] = d
        return cls(lang, t2i, df, n_docs)


def build_vocabulary(docs: Sequence[Document], min_df: int = 1, top_k_drop: int = 0) -> Vocabulary:
    """Collect document frequencies, drop rare terms and the ``top_k_drop`` most
    frequent ones, and index the survivors in lexicographic order."""
    if min_df < 1 or top_k_drop < 0:
        raise ValueError("min_df must be >= 1 and top_k_drop >= 0")
    if not docs:
        raise ValueError("cannot build a vocabulary from zero documents")
    lang = docs[0].lang
    df: Counter[str] = Counter()
    for d in docs:
        if d.lang != lang:
            raise ValueError(f"document {d.id!r} has lang {d.lang!r}, expected {lang!r}")
        df.update(set(d.tokens))
    kept = [t for t, c in df.items() if c >= min_df]
    if top_k_drop:
        by_freq = sorted(kept, key=lambda t: (-df[t], t))
        dropped = set(by_freq[:top_k_drop])
        kept = [t for t in kept if t not in dropped]
    kept.sort()
    return Vocabulary(lang, {t: i for i, t in enumerate(kept)},
                      np.array([df[t] for t in kept], np.int64), len(docs))


@dataclass
class SlidingIdfState:
    """Document frequencies over the trailing ``window_days`` of a stream."""

    lang: str
    window_days: int = 10
    df: Counter = field(default_factory=Counter)
    newest: int | None = None
    _heap: list = field(default_factory=list, repr=False)
    _seq: int = 0

    def __post_init__(self):
        if self.window_days <= 0:
            raise ValueError("window_days must be positive")

    @property
    def n_docs(self) -> int:
        return len(self._heap)

    def retained(self) -> list[tuple[int, frozenset]]:
        return sorted((ts, terms) for ts, _, terms in self._heap)

    def ingest(self, doc: Document) -> "SlidingIdfState":
        if doc.timestamp is None:
            raise ValueError(f"document {doc.id!r} has no timestamp")
        if doc.lang != self.lang:
            raise ValueError(f"document {doc.id!r} is {doc.lang!r}, state is {self.lang!r}")
        ts = int(doc.timestamp)
        self.newest = ts if self.newest is None else max(self.newest, ts)
        cutoff = self.newest - self.window_days * SECONDS_PER_DAY
        if ts >= cutoff:
            terms = frozenset(doc.tokens)
            heapq.heappush(self._heap, (ts, self._seq, terms))
            self._seq += 1
            self.df.update(terms)
        while self._heap and self._heap[0][0] < cutoff:
            _, _, old = heapq.heappop(self._heap)
            self.df.subtract(old)
            for t in old:
                if self.df[t] <= 0:
                    del self.df[t]
        return self


def sliding_idf_ingest(state: SlidingIdfState, doc: Document) -> SlidingIdfState:
    return state.ingest(doc)


def _idf_lookup(vocab: Vocabulary, idf_source) -> np.ndarray:
    if idf_source is None or idf_source is vocab:
        return vocab.idf()
    if isinstance(idf_source, Vocabulary):
        if idf_source.term_to_index == vocab.term_to_index:
            return idf_source.idf()
        n, out = idf_source.n_docs, np.full(len(vocab), np.nan)
        for t, i in vocab.term_to_index.items():
            j = idf_source.term_to_index.get(t)
            if j is not None:
                out[i] = math.log(n / idf_source.df[j])
        return out
    if isinstance(idf_source, SlidingIdfState):
        n, out = idf_source.n_docs, np.full(len(vocab), np.nan)
        for t, i in vocab.term_to_index.items():
            c = idf_source.df.get(t, 0)
            if c > 0:
                out[i] = math.log(n / c)
        return out
    raise TypeError(f"unsupported idf source {type(idf_source).__name__}")


def vectorize(doc: Document, vocab: Vocabulary, idf_source=None,
              normalize: bool = True) -> SparseVector:
    """TFIDF vector of ``doc``.

    Out-of-vocabulary terms are dropped, as are terms whose IDF is unavailable
    (zero document frequency in a sliding window) or exactly zero.
    """
    if doc.lang != vocab.lang:
        raise ValueError(f"document {doc.id!r} is {doc.lang!r}, vocabulary is {vocab.lang!r}")
    if isinstance(idf_source, SlidingIdfState):
        # only the document's own terms need a window IDF
        n, t2i = idf_source.n_docs, vocab.term_to_index
        idf = {}
        for t in set(doc.tokens):
            c = idf_source.df.get(t, 0)
            if t in t2i and c > 0:
                idf[t2i[t]] = math.log(n / c)
        return _vectorize(doc.tokens, vocab, _SparseIdf(idf), normalize)
    return _vectorize(doc.tokens, vocab, _idf_lookup(vocab, idf_source), normalize)


class _SparseIdf:
    """Array-like IDF lookup that is NaN outside the given entries."""

    def __init__(self, entries: dict[int, float]):
        self.entries = entries

    def __getitem__(self, idx):
        return np.array([self.entries.get(int(i), np.nan) for i in idx], np.float64)


def _vectorize(tokens, vocab: Vocabulary, idf: np.ndarray, normalize: bool) -> SparseVector:
    t2i = vocab.term_to_index
    tf = Counter(t2i[t] for t in tokens if t in t2i)
    if not tf:
        return SparseVector.zeros(len(vocab))
    idx = np.fromiter(sorted(tf), np.int64, len(tf))
    w = np.array([tf[i] for i in idx], np.float64) * idf[idx]
    keep = np.isfinite(w) & (w != 0.0)
    v = SparseVector(len(vocab), idx[keep], w[keep])
    return v.normalized() if normalize else v


def vectorize_many(docs: Sequence[Document], vocab: Vocabulary, idf_source=None,
                   normalize: bool = True) -> sp.csc_matrix:
    idf = _idf_lookup(vocab, idf_source)
    cols = []
    for d in docs:
        if d.lang != vocab.lang:
            raise ValueError(f"document {d.id!r} is {d.lang!r}, vocabulary is {vocab.lang!r}")
        cols.append(_vectorize(d.tokens, vocab, idf, normalize))
    return stack_columns(cols, len(vocab))
