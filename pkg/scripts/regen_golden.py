"""Run the full command-line pipeline on the bundled synthetic data and
(re)write the golden outputs the test suite compares against byte for byte.

    python scripts/regen_golden.py            # rewrite tests/data/golden
    python scripts/regen_golden.py --check    # compare only, exit 1 on drift
"""
from __future__ import annotations

import argparse
import filecmp
import shutil
import sys
import tempfile
from collections import Counter
from pathlib import Path

from xlnews.cli import run

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "tests" / "data" / "synth3"
GOLDEN = ROOT / "tests" / "data" / "golden"

# golden file name -> path relative to the work directory
GOLDEN_FILES = {
    "report.hubcca.tsv": "eval.hubcca/report.tsv",
    "report.lsi.tsv": "eval.lsi/report.tsv",
    "report.kmeans.tsv": "eval.kmeans/report.tsv",
    "ranks.hubcca.tsv": "eval.hubcca/ranks.tsv",
    "knn.tsv": "knn/knn.tsv",
    "assignments.en.tsv": "clusters/assignments.en.tsv",
    "assignments.es.tsv": "clusters/assignments.es.tsv",
    "candidates.tsv": "cand/candidates.tsv",
    "features.tsv": "feat/features.tsv",
    "cv.tsv": "cv/cv.tsv",
}


def _call(*argv: str) -> None:
    code = run(list(argv))
    if code != 0:
        raise SystemExit(f"pipeline step failed ({code}): {' '.join(argv)}")


def label_candidates(candidates: Path, clusters_dir: Path, events: Path, out: Path) -> None:
    """Label each candidate pair 1 when both clusters' majority planted event agree."""
    from xlnews.eventlink import read_clusters

    event = dict(line.rstrip("\n").split("\t") for line in open(events, encoding="utf-8"))
    majority = {}
    for p in sorted(clusters_dir.glob("clusters.*.jsonl")):
        for c in read_clusters(p):
            counts = Counter(event[a] for a in c.article_ids)
            best = max(counts.values())
            majority[c.id] = min(e for e, n in counts.items() if n == best)
    with open(candidates, encoding="utf-8") as fh, open(out, "w", encoding="utf-8") as fo:
        for line in fh:
            a, b = line.rstrip("\n").split("\t")
            fo.write(f"{a}\t{b}\t{int(majority[a] == majority[b])}\n")


def run_pipeline(work: Path, data: Path = DATA) -> None:
    g = ["--seed", "0", "--threads", "1"]
    docs = [f"--docs={data / f'docs.{l}.jsonl'}" for l in ("en", "es", "de")]
    _call("corpus", *docs, "--alignment", str(data / "alignment.tsv"),
          "--test-empty-pairs", "es-de", "--out", str(work / "corpus"), *g)
    for method, extra in (("hubcca", ["--k-lsi", "8"]), ("lsi", ["--k", "8"]), ("kmeans", ["--k", "8"])):
        _call("train", "--corpus", str(work / "corpus/train"), "--method", method, *extra,
              "--out", str(work / f"model.{method}"), *g)
        _call("eval-mate", "--model", str(work / f"model.{method}/model.xlem"),
              "--test", str(work / "corpus/test"), "--out", str(work / f"eval.{method}"), *g)
    vocab = [f"--vocab={l}={work / 'corpus/train' / f'vocab.{l}.tsv'}" for l in ("en", "es")]
    # a few queries and targets for the kNN command
    for lang, n in (("en", 20), ("es", 60)):
        lines = (data / f"docs.{lang}.jsonl").read_text(encoding="utf-8").splitlines()[:n]
        (work / f"sample.{lang}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _call("knn", "--model", str(work / "model.hubcca/model.xlem"), *vocab,
          "--queries", str(work / "sample.en.jsonl"), "--targets", str(work / "sample.es.jsonl"),
          "--knn-k", "5", "--out", str(work / "knn"), *g)
    streams = [f"--stream={data / f'stream.{l}.jsonl'}" for l in ("en", "es")]
    _call("cluster-stream", *streams, *vocab, "--promote-at", "2", "--out", str(work / "clusters"), *g)
    clusters = [f"--clusters={work / 'clusters' / f'clusters.{l}.jsonl'}" for l in ("en", "es")]
    _call("candidates", "--model", str(work / "model.hubcca/model.xlem"), *streams, *vocab,
          *clusters, "--promote-at", "2", "--out", str(work / "cand"), *g)
    label_candidates(work / "cand/candidates.tsv", work / "clusters", data / "stream_events.tsv",
                     work / "labelled.tsv")
    _call("features", *clusters, "--links", str(work / "cand/links.jsonl"),
          "--pairs", str(work / "labelled.tsv"), "--out", str(work / "feat"), *g)
    _call("train-linker", "--features", str(work / "feat/features.tsv"), "--out", str(work / "linker"), *g)
    _call("eval-linker", "--features", str(work / "feat/features.tsv"), "--folds", "5",
          "--out", str(work / "cv"), *g)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--check", action="store_true")
    a = ap.parse_args(argv)
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        run_pipeline(work)
        if a.check:
            bad = [n for n, rel in GOLDEN_FILES.items()
                   if not filecmp.cmp(work / rel, GOLDEN / n, shallow=False)]
            for n in bad:
                print(f"differs: {n}")
            return 1 if bad else 0
        GOLDEN.mkdir(parents=True, exist_ok=True)
        for name, rel in GOLDEN_FILES.items():
            shutil.copyfile(work / rel, GOLDEN / name)
    print(f"wrote {len(GOLDEN_FILES)} golden files to {GOLDEN}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
