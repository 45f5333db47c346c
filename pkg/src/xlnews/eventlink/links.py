"""Cross-lingual candidate clusters and the features describing a cluster pair."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Mapping, Sequence

import numpy as np

from .cluster import Cluster

# article id -> language -> [(neighbour article id, similarity), ...] (at most k_nn each)
KnnLinks = Mapping[str, Mapping[str, Sequence[tuple[str, float]]]]


def candidate_clusters(c_i: Cluster, knn_links: KnnLinks,
                       clusters_by_article: Mapping[str, str]) -> list[str]:
    """Ids of clusters in other languages that contain a nearest neighbour of
    any article of ``c_i``.  Neighbours without a cluster are skipped and
    ``c_i`` itself is never returned.  The result is sorted."""
    out: set[str] = set()
    for a in c_i.article_ids:
        for lang, neigh in knn_links.get(a, {}).items():
            if lang == c_i.lang:
                continue
            for b, _ in neigh:
                cid = clusters_by_article.get(b)
                if cid is not None and cid != c_i.id:
                    out.add(cid)
    return sorted(out)


@dataclass(frozen=True)
class LinkFeatureVector:
    linkCount: float
    avgSimScore: float
    entityCosSim: float
    keywordCosSim: float
    entityJaccardSim: float
    keywordJaccardSim: float
    hasSameLocation: float
    timeDiff: float
    sharedDates: float

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"feature {f.name} is not finite")

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "LinkFeatureVector":
        return cls(*(float(x) for x in a))


FEATURE_NAMES = tuple(f.name for f in fields(LinkFeatureVector))
FEATURE_GROUPS = {
    "link": ("linkCount", "avgSimScore"),
    "concept": ("entityCosSim", "keywordCosSim", "entityJaccardSim", "keywordJaccardSim"),
    "misc": ("hasSameLocation", "timeDiff", "sharedDates"),
}


def weighted_cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    na = math.sqrt(sum(a[k] ** 2 for k in sorted(a)))
    nb = math.sqrt(sum(b[k] ** 2 for k in sorted(b)))
    if na == 0 or nb == 0:
        return 0.0
    # fixed summation order keeps the value bit-identical under swapping a and b
    dot = sum(a[k] * b[k] for k in sorted(a.keys() & b.keys()))
    return min(1.0, max(0.0, dot / (na * nb)))


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def extract_features(c_i: Cluster, c_j: Cluster, knn_links: KnnLinks) -> LinkFeatureVector:
    """Features of the ordered pair ``(c_i, c_j)``.

    The link features count neighbour slots of ``c_i``'s articles that land in
    ``c_j``, so they depend on the direction; all other features are
    symmetric.
    """
    if c_i.lang == c_j.lang:
        raise ValueError("clusters must be in different languages")
    members = set(c_j.article_ids)
    sims = [s for a in c_i.article_ids
            for b, s in knn_links.get(a, {}).get(c_j.lang, ())
            if b in members]
    same_loc = c_i.location is not None and c_i.location == c_j.location
    return LinkFeatureVector(
        linkCount=float(len(sims)),
        avgSimScore=float(np.mean(sims)) if sims else 0.0,
        entityCosSim=weighted_cosine(c_i.entities, c_j.entities),
        keywordCosSim=weighted_cosine(c_i.keywords, c_j.keywords),
        entityJaccardSim=jaccard(c_i.entities, c_j.entities),
        keywordJaccardSim=jaccard(c_i.keywords, c_j.keywords),
        hasSameLocation=1.0 if same_loc else 0.0,
        timeDiff=abs(c_i.avg_ts - c_j.avg_ts) / 3600.0,
        sharedDates=jaccard(c_i.dates_mentioned, c_j.dates_mentioned),
    )
