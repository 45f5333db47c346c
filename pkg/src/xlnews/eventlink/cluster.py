"""Online clustering of a monolingual article stream.

Each live cluster keeps the running sum of its members' vectors, so the
centroid (normalized mean) is available without revisiting members.  Sums for
all live clusters sit in one dense matrix, which keeps scoring a new article a
single matrix-vector product; memory is ``live clusters x vocabulary``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..textvec import SparseVector

SECONDS_PER_DAY = 86400


@dataclass
class Article:
    id: str
    lang: str
    vector: SparseVector
    timestamp: int
    entities: dict[str, float] = field(default_factory=dict)
    keywords: dict[str, float] = field(default_factory=dict)
    location: str | None = None
    dates: frozenset[str] = frozenset()


@dataclass
class Cluster:
    id: str
    lang: str
    article_ids: list[str]
    centroid: SparseVector | None
    oldest_ts: int
    avg_ts: float
    entities: dict[str, float] = field(default_factory=dict)
    keywords: dict[str, float] = field(default_factory=dict)
    location: str | None = None
    dates_mentioned: set[str] = field(default_factory=set)
    seq: int = 0
    ts_sum: int = 0
    location_votes: Counter = field(default_factory=Counter, repr=False)

    @property
    def size(self) -> int:
        return len(self.article_ids)

    def add_annotations(self, a: Article) -> None:
        for k, w in a.entities.items():
            self.entities[k] = self.entities.get(k, 0.0) + w
        for k, w in a.keywords.items():
            self.keywords[k] = self.keywords.get(k, 0.0) + w
        if a.location is not None:
            self.location_votes[a.location] += 1
            # most frequent location, ties to the lexicographically smallest
            best = max(self.location_votes.values())
            self.location = min(l for l, c in self.location_votes.items() if c == best)
        self.dates_mentioned.update(a.dates)


@dataclass
class Assignment:
    cluster_id: str
    is_new: bool
    similarity: float


@dataclass
class ClusterStreamState:
    lang: str
    dim: int
    threshold: float = 0.4
    max_age_days: float = 4.0
    promote_at: int = 3
    idf: object | None = None          # optional SlidingIdfState used to vectorize the stream
    live: list[Cluster] = field(default_factory=list)
    retired: list[Cluster] = field(default_factory=list)
    latest_ts: int | None = None
    _buf: np.ndarray = field(default=None, repr=False)
    _next_id: int = 0

    def __post_init__(self):
        if self._buf is None:
            self._buf = np.zeros((16, self.dim))

    @property
    def _sums(self) -> np.ndarray:
        """Rows of the sum buffer that belong to live clusters, in ``live`` order."""
        return self._buf[:len(self.live)]

    def _append_row(self) -> np.ndarray:
        n = len(self.live)
        if n == self._buf.shape[0]:
            grown = np.zeros((2 * n, self.dim))
            grown[:n] = self._buf
            self._buf = grown
        self._buf[n] = 0.0
        return self._buf[n]

    def _keep_rows(self, rows: list[int]) -> None:
        n = len(rows)
        self._buf[:n] = self._buf[rows]
        self._buf[n:len(self.live)] = 0.0

    def _row(self, c: Cluster) -> int:
        return self.live.index(c)

    def centroid_of(self, c: Cluster) -> np.ndarray:
        s = self._sums[self._row(c)]
        n = np.linalg.norm(s)
        return s / n if n > 0 else s.copy()

    def events(self) -> list[Cluster]:
        """Live clusters that have reached the promotion size."""
        return [c for c in self.live if c.size >= self.promote_at]


def _freeze_centroid(c: Cluster, sums_row: np.ndarray) -> None:
    n = np.linalg.norm(sums_row)
    c.centroid = SparseVector.from_dense(sums_row / n if n > 0 else sums_row)


def online_cluster_step(state: ClusterStreamState, article: Article) -> Assignment:
    """Assign one article to the most similar live cluster, or start a new one.

    The article joins the best cluster when the cosine with its centroid is at
    least ``state.threshold``; equal similarities go to the older cluster.
    Clusters whose oldest article is more than ``max_age_days`` older than the
    newest timestamp seen are expired afterwards and moved to ``state.retired``.
    """
    v = article.vector
    if v.dim != state.dim:
        raise ValueError(f"article vector has dim {v.dim}, stream has {state.dim}")
    if article.timestamp < 0:
        raise ValueError("timestamps must be non-negative")
    vn = v.norm()
    best, best_sim = None, 0.0
    if state.live and vn > 0:
        S = state._sums
        dots = S[:, v.indices] @ v.values
        norms = np.linalg.norm(S, axis=1)
        sims = np.where(norms > 0, dots / np.where(norms > 0, norms, 1.0) / vn, 0.0)
        # live is kept in (oldest_ts, seq) order, so argmax picks the older on ties
        j = int(np.argmax(sims))
        best, best_sim = j, float(min(1.0, sims[j]))
    if best is not None and best_sim >= state.threshold:
        c = state.live[best]
        state._sums[best, v.indices] += v.values
        c.article_ids.append(article.id)
        c.ts_sum += article.timestamp
        c.avg_ts = c.ts_sum / c.size
        if article.timestamp < c.oldest_ts:
            c.oldest_ts = article.timestamp
            _resort(state)
        c.add_annotations(article)
        result = Assignment(c.id, False, best_sim)
    else:
        c = Cluster(f"{state.lang}-c{state._next_id:07d}", state.lang, [article.id], None,
                    article.timestamp, float(article.timestamp), seq=state._next_id,
                    ts_sum=article.timestamp)
        c.add_annotations(article)
        state._next_id += 1
        row = state._append_row()
        row[v.indices] = v.values
        state.live.append(c)
        _resort(state)
        result = Assignment(c.id, True, best_sim)
    state.latest_ts = article.timestamp if state.latest_ts is None else max(state.latest_ts, article.timestamp)
    state.retired.extend(expire_clusters(state, state.latest_ts))
    return result


def _resort(state: ClusterStreamState) -> None:
    order = sorted(range(len(state.live)), key=lambda r: (state.live[r].oldest_ts, state.live[r].seq))
    if order != list(range(len(order))):
        state._keep_rows(order)
        state.live = [state.live[r] for r in order]


def expire_clusters(state: ClusterStreamState, now: int) -> list[Cluster]:
    """Remove and return clusters whose oldest article is strictly older than
    ``now - max_age_days``.  Returned clusters carry a frozen centroid."""
    if state.latest_ts is not None and now < state.latest_ts:
        raise ValueError("now precedes the latest ingested timestamp")
    cutoff = now - state.max_age_days * SECONDS_PER_DAY
    keep, gone = [], []
    for r, c in enumerate(state.live):
        (gone if c.oldest_ts < cutoff else keep).append(r)
    removed = []
    for r in gone:
        c = state.live[r]
        _freeze_centroid(c, state._sums[r])
        removed.append(c)
    if gone:
        state._keep_rows(keep)
        state.live = [state.live[r] for r in keep]
    return removed


def flush_clusters(state: ClusterStreamState) -> list[Cluster]:
    """Freeze and return every live cluster, leaving the state empty."""
    out = []
    for r, c in enumerate(state.live):
        _freeze_centroid(c, state._sums[r])
        out.append(c)
    state._keep_rows([])
    state.live = []
    return out


def snapshot_clusters(state: ClusterStreamState) -> list[Cluster]:
    """Live clusters with their current centroids filled in (state unchanged)."""
    for r, c in enumerate(state.live):
        _freeze_centroid(c, state._sums[r])
    return list(state.live)
