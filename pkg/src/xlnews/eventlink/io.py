"""Files used by the linking pipeline: cluster JSON lines, labelled cluster
pairs and the binary linker model."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

import numpy as np

from ..binfmt import ContainerFormatError, read_container, write_container
from .cluster import Cluster
from .svm import LinearModel

LINKER_MAGIC = b"XLNK"


def cluster_to_json(c: Cluster) -> dict:
    return {"id": c.id, "lang": c.lang, "article_ids": list(c.article_ids),
            "entities": dict(sorted(c.entities.items())),
            "keywords": dict(sorted(c.keywords.items())),
            "location": c.location, "avg_ts": int(round(c.avg_ts)), "oldest_ts": int(c.oldest_ts),
            "dates": sorted(c.dates_mentioned)}


def cluster_from_json(d: dict) -> Cluster:
    if not d.get("article_ids"):
        raise ValueError(f"cluster {d.get('id')!r} has no articles")
    return Cluster(str(d["id"]), str(d["lang"]), [str(a) for a in d["article_ids"]], None,
                   int(d["oldest_ts"]), float(d["avg_ts"]),
                   {str(k): float(v) for k, v in d.get("entities", {}).items()},
                   {str(k): float(v) for k, v in d.get("keywords", {}).items()},
                   d.get("location"), set(d.get("dates", [])))


def write_clusters(path: str | Path, clusters: Iterable[Cluster]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in clusters:
            fh.write(json.dumps(cluster_to_json(c), sort_keys=True, ensure_ascii=False) + "\n")


def read_clusters(path: str | Path) -> list[Cluster]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(cluster_from_json(json.loads(line)))
                except (KeyError, ValueError, TypeError) as e:
                    raise ValueError(f"{path}:{lineno}: bad cluster record ({e})") from None
    return out


def write_labelled_pairs(path: str | Path, pairs: Iterable[tuple[str, str, int]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b, label in pairs:
            fh.write(f"{a}\t{b}\t{int(label)}\n")


def read_labelled_pairs(path: str | Path) -> list[tuple[str, str, int]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: expected cluster_a<TAB>cluster_b<TAB>0|1")
            out.append((parts[0], parts[1], int(parts[2])))
    return out


def save_linker(model: LinearModel, path: str | Path) -> None:
    header = {"feature_names": list(model.feature_names), "bias": float(model.bias).hex(),
              "config": model.config}
    stats = np.vstack([model.weights, model.mean, model.scale])
    write_container(path, LINKER_MAGIC, header, [(0, [stats])])


def load_linker(path: str | Path) -> LinearModel:
    header, blocks = read_container(path, LINKER_MAGIC)
    if len(blocks) != 1 or len(blocks[0][1]) != 1 or blocks[0][1][0].shape[0] != 3:
        raise ContainerFormatError("linker file must hold one 3 x d matrix")
    w, mean, scale = blocks[0][1][0]
    return LinearModel(w.copy(), float.fromhex(header["bias"]), mean.copy(), scale.copy(),
                       tuple(header["feature_names"]), dict(header["config"]))
