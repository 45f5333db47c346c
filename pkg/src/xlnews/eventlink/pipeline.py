"""Glue between the stages of the linking pipeline: clustering whole streams,
cross-lingual nearest-neighbour links between articles, and labelled
cluster-pair datasets."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ..textvec import Document, SlidingIdfState, SparseVector, Vocabulary, stack_columns, vectorize
from ..xmodels.model import ProjectionModel, project_collection
from .cluster import Article, Cluster, ClusterStreamState, flush_clusters, online_cluster_step
from .links import KnnLinks, LinkFeatureVector, candidate_clusters, extract_features


@dataclass
class StreamConfig:
    threshold: float = 0.4
    max_age_days: float = 4.0
    idf_window_days: int = 10
    promote_at: int = 3


@dataclass
class AnnotatedDocument:
    doc: Document
    entities: dict[str, float] = field(default_factory=dict)
    keywords: dict[str, float] = field(default_factory=dict)
    location: str | None = None
    dates: frozenset[str] = frozenset()

    def to_json(self) -> str:
        obj = json.loads(self.doc.to_json())
        obj.update(entities=dict(sorted(self.entities.items())),
                   keywords=dict(sorted(self.keywords.items())),
                   location=self.location, dates=sorted(self.dates))
        return json.dumps(obj, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "AnnotatedDocument":
        obj = json.loads(line)
        return cls(Document.from_json(line),
                   {str(k): float(v) for k, v in obj.get("entities", {}).items()},
                   {str(k): float(v) for k, v in obj.get("keywords", {}).items()},
                   obj.get("location"), frozenset(obj.get("dates", ())))


def read_stream(path: str | Path) -> list[AnnotatedDocument]:
    with open(path, encoding="utf-8") as fh:
        return [AnnotatedDocument.from_json(line) for line in fh if line.strip()]


def write_stream(path: str | Path, docs: Iterable[AnnotatedDocument]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(d.to_json() + "\n")


@dataclass
class StreamVectors:
    lang: str
    vectors: dict[str, SparseVector]
    timestamps: dict[str, int]


def _check_order(docs: Sequence[AnnotatedDocument]) -> str:
    if not docs:
        raise ValueError("empty stream")
    last = None
    for ad in docs:
        d = ad.doc
        if d.timestamp is None:
            raise ValueError(f"article {d.id!r} has no timestamp")
        if last is not None and d.timestamp < last:
            raise ValueError(f"stream is not sorted by timestamp at {d.id!r}")
        last = d.timestamp
    return docs[0].doc.lang


def _windowed_vectors(docs: Sequence[AnnotatedDocument], vocab: Vocabulary, window_days: int):
    """Yield ``(annotated doc, vector)``, each vector using the IDF of the
    sliding window that ends at (and includes) its own article."""
    idf = SlidingIdfState(docs[0].doc.lang, window_days)
    for ad in docs:
        idf.ingest(ad.doc)
        yield ad, vectorize(ad.doc, vocab, idf)


def stream_vectors(docs: Sequence[AnnotatedDocument], vocab: Vocabulary,
                   window_days: int = 10) -> StreamVectors:
    """The vectors :func:`cluster_stream` would compute, without clustering."""
    lang = _check_order(docs)
    vectors, stamps = {}, {}
    for ad, v in _windowed_vectors(docs, vocab, window_days):
        vectors[ad.doc.id], stamps[ad.doc.id] = v, int(ad.doc.timestamp)
    return StreamVectors(lang, vectors, stamps)


@dataclass
class StreamResult:
    lang: str
    clusters: list[Cluster]                  # every cluster ever formed, in creation order
    article_cluster: dict[str, str]
    vectors: dict[str, SparseVector]
    timestamps: dict[str, int]

    def events(self, promote_at: int) -> list[Cluster]:
        return [c for c in self.clusters if c.size >= promote_at]


def cluster_stream(docs: Sequence[AnnotatedDocument], vocab: Vocabulary,
                   config: StreamConfig = StreamConfig()) -> StreamResult:
    """Run online clustering over a time-ordered monolingual stream.

    Each article is first added to a sliding-window IDF and then vectorized
    with the window's IDF.  Documents must be sorted by timestamp.
    """
    lang = _check_order(docs)
    state = ClusterStreamState(lang, len(vocab), config.threshold, config.max_age_days,
                               config.promote_at)
    vectors, stamps, article_cluster = {}, {}, {}
    for ad, v in _windowed_vectors(docs, vocab, config.idf_window_days):
        d = ad.doc
        vectors[d.id], stamps[d.id] = v, int(d.timestamp)
        res = online_cluster_step(state, Article(d.id, lang, v, int(d.timestamp), ad.entities,
                                                 ad.keywords, ad.location, ad.dates))
        article_cluster[d.id] = res.cluster_id
    clusters = state.retired + flush_clusters(state)
    clusters.sort(key=lambda c: c.seq)
    return StreamResult(lang, clusters, article_cluster, vectors, stamps)


def knn_links(model: ProjectionModel, streams: Sequence[StreamVectors | StreamResult], k_nn: int = 10,
              window_hours: float | None = None, block: int = 512) -> dict[str, dict[str, list]]:
    """Top-``k_nn`` cross-lingual neighbours of every article in every other
    language.  With ``window_hours`` only target articles published within
    that many hours of the query count, as an online system would only index
    recent articles.  Ties go to the earlier target in stream order."""
    proj = {}
    for st in streams:
        ids = list(st.vectors)
        Z = project_collection(model, st.lang, stack_columns([st.vectors[a] for a in ids],
                                                             model.map_for(st.lang).n_in))
        ts = np.array([st.timestamps[a] for a in ids], np.int64)
        proj[st.lang] = (ids, Z, ts)
    links: dict[str, dict[str, list]] = {}
    for li, (qids, Zq, tq) in proj.items():
        for lj, (tids, Zt, tt) in proj.items():
            if li == lj:
                continue
            k = min(k_nn, len(tids))
            for lo in range(0, len(qids), block):
                S = Zq[:, lo:lo + block].T @ Zt
                if window_hours is not None:
                    far = np.abs(tq[lo:lo + block, None] - tt[None, :]) > window_hours * 3600
                    S = np.where(far, -np.inf, S)
                order = np.argsort(-S, axis=1, kind="stable")[:, :k]
                for r, q in enumerate(qids[lo:lo + block]):
                    row = [(tids[c], float(S[r, c])) for c in order[r] if np.isfinite(S[r, c])]
                    links.setdefault(q, {})[lj] = row
    return links


@dataclass
class PairDataset:
    pairs: list[tuple[str, str]]
    features: list[LinkFeatureVector]
    labels: np.ndarray

    def examples(self) -> list[tuple[LinkFeatureVector, int]]:
        return list(zip(self.features, self.labels.tolist()))


def candidate_pairs(source: Sequence[Cluster], targets: Sequence[Cluster],
                    links: KnnLinks) -> list[tuple[Cluster, Cluster]]:
    """Candidate generation for every cluster of ``source`` against the
    clusters in ``targets`` (usually the events of one other language)."""
    by_article = {a: c.id for c in targets for a in c.article_ids}
    by_id = {c.id: c for c in targets}
    out = []
    for c in source:
        for cid in candidate_clusters(c, links, by_article):
            out.append((c, by_id[cid]))
    return out


def build_pair_dataset(source: Sequence[Cluster], targets: Sequence[Cluster], links: KnnLinks,
                       label_fn: Callable[[Cluster, Cluster], int] | None = None) -> PairDataset:
    pairs, feats, labels = [], [], []
    for ci, cj in candidate_pairs(source, targets, links):
        pairs.append((ci.id, cj.id))
        feats.append(extract_features(ci, cj, links))
        labels.append(label_fn(ci, cj) if label_fn else 0)
    return PairDataset(pairs, feats, np.asarray(labels, np.int64))


def majority_label(cluster: Cluster, article_label: Mapping[str, object]):
    """Most common label among the cluster's articles (ties to the smallest)."""
    counts: dict = {}
    for a in cluster.article_ids:
        lab = article_label[a]
        counts[lab] = counts.get(lab, 0) + 1
    best = max(counts.values())
    return min(l for l, c in counts.items() if c == best)
