"""Mate retrieval evaluation: ranks of true mates, retrieval scores and
(averaged) mean reciprocal rank."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .xmodels.model import ProjectionModel, project_collection


@dataclass(frozen=True)
class RankList:
    pair: tuple[str, str]
    ranks: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranks, dtype=np.int64)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("ranks must be a nonempty 1-d sequence")
        if r.min() < 1 or r.max() > r.size:
            raise ValueError(f"ranks must lie in [1, {r.size}]")
        object.__setattr__(self, "ranks", r)

    @property
    def n(self) -> int:
        return int(self.ranks.size)


def ranks_from_scores(S: np.ndarray) -> np.ndarray:
    """Rank of the diagonal entry in each row of a square score matrix.

    Rank is one plus the number of candidates scoring strictly higher plus the
    number of equal-scoring candidates with a lower index.
    """
    S = np.asarray(S)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("score matrix must be square")
    mate = np.diag(S)[:, None]
    lower = np.tri(n, k=-1, dtype=bool)
    return 1 + (S > mate).sum(axis=1) + ((S == mate) & lower).sum(axis=1)


def mate_ranks(model: ProjectionModel, lang_i: str, X, lang_j: str, Y,
               block: int = 1024) -> RankList:
    """Rank of each document's mate among all candidate documents.

    Column ``l`` of ``X`` (language ``lang_i``) and column ``l`` of ``Y``
    (language ``lang_j``) are mates.  Queries are processed in blocks so
    memory stays at ``block x n``.
    """
    Zq = project_collection(model, lang_i, X)
    Zt = project_collection(model, lang_j, Y)
    n = Zq.shape[1]
    if Zt.shape[1] != n:
        raise ValueError(f"query and candidate counts differ: {n} vs {Zt.shape[1]}")
    if n < 2:
        raise ValueError("mate retrieval needs at least two test pairs")
    ranks = np.empty(n, np.int64)
    cols = np.arange(n)
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        S = Zq[:, lo:hi].T @ Zt
        rows = np.arange(hi - lo)
        mate = S[rows, lo + rows][:, None]
        earlier = cols[None, :] < (lo + rows)[:, None]
        ranks[lo:hi] = 1 + (S > mate).sum(axis=1) + ((S == mate) & earlier).sum(axis=1)
    return RankList((lang_i, lang_j), ranks)


def retrieval_score(ranks: RankList) -> tuple[float, float]:
    """``(score_printed, score_scaled)``; the first lies in [-50, 50], the
    second is twice the first."""
    n = ranks.n
    if n < 2:
        raise ValueError("retrieval score needs n >= 2")
    r = ranks.ranks.astype(np.float64)
    printed = 100.0 / n * float(np.sum((n - r) / (n - 1) - 0.5))
    return printed, 2.0 * printed


def mrr(ranks: RankList) -> float:
    return float(np.mean(1.0 / ranks.ranks))


def amrr(mrrs: Iterable[float]) -> float:
    vals = list(mrrs)
    if not vals:
        raise ValueError("amrr of an empty collection")
    return float(np.mean(vals))


@dataclass(frozen=True)
class PairReport:
    pair: tuple[str, str]
    n: int
    score_printed: float
    score_scaled: float
    mrr: float


def summarize(rank_lists: Sequence[RankList]) -> tuple[list[PairReport], float]:
    rows = []
    for rl in rank_lists:
        sp, ss = retrieval_score(rl)
        rows.append(PairReport(rl.pair, rl.n, sp, ss, mrr(rl)))
    return rows, amrr(r.mrr for r in rows)


def evaluate_test_set(model: ProjectionModel, test, both_directions: bool = True,
                      block: int = 1024) -> list[RankList]:
    """Rank lists for every language pair of a :class:`~xlnews.corpus.TestSet`
    that the model covers."""
    out = []
    for (i, j) in sorted(test.pairs):
        li, lj = test.langs[i], test.langs[j]
        if li not in model.langs or lj not in model.langs:
            continue
        A, B = test.pairs[(i, j)]
        if A.shape[1] < 2:
            continue
        out.append(mate_ranks(model, li, A, lj, B, block))
        if both_directions:
            out.append(mate_ranks(model, lj, B, li, A, block))
    return out


REPORT_COLUMNS = ("pair", "n", "score_printed", "score_scaled", "mrr")


def write_report(path: str | Path, rows: Sequence[PairReport], amrr_value: float) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([f"{r.pair[0]}-{r.pair[1]}", r.n, f"{r.score_printed:.6f}",
                        f"{r.score_scaled:.6f}", f"{r.mrr:.6f}"])
        w.writerow(["amrr", sum(r.n for r in rows), "", "", f"{amrr_value:.6f}"])


def read_report(path: str | Path) -> tuple[list[PairReport], float]:
    rows, total = [], None
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)
        if tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"unexpected report header {header}")
        for rec in reader:
            if rec[0] == "amrr":
                total = float(rec[4])
                continue
            a, b = rec[0].split("-", 1)
            rows.append(PairReport((a, b), int(rec[1]), float(rec[2]), float(rec[3]), float(rec[4])))
    if total is None:
        raise ValueError("report has no amrr summary row")
    return rows, total
