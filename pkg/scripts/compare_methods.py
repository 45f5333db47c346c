"""Train every projection method on a synthetic three-language corpus with one
language pair's alignment held out, and print mate-retrieval results per pair.

    python scripts/compare_methods.py --k 30 --docs 5000
"""
from __future__ import annotations

import argparse
import logging
import time

import numpy as np

from xlnews.corpus import EmptyPairs, import_corpus, split_train_test
from xlnews.evalkit import amrr, evaluate_test_set, mrr, retrieval_score
from xlnews.synth import generate_comparable_corpus
from xlnews.xmodels import train_hubcca_model, train_kmeans_model, train_lsi_model


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--k", type=int, default=30)
    ap.add_argument("--docs", type=int, default=5000)
    ap.add_argument("--topics", type=int, default=30)
    ap.add_argument("--vocab", type=int, default=2000)
    ap.add_argument("--hold-out", default="es-de", help="language pair removed from training")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.ERROR)

    sc = generate_comparable_corpus(a.docs, a.topics, a.vocab, seed=a.seed)
    corpus, _ = import_corpus(sc.docs, (sc.langs, sc.rows))
    train, test = split_train_test(corpus, EmptyPairs((tuple(a.hold_out.split("-")),)))
    print(f"train columns {train.s}, test columns {len(test)}, held-out pair {a.hold_out}")
    trainers = {
        "hubcca": lambda: train_hubcca_model(train, k_lsi=a.k, seed=a.seed),
        "lsi": lambda: train_lsi_model(train, a.k, seed=a.seed),
        "kmeans": lambda: train_kmeans_model(train, a.k, seed=a.seed),
    }
    print(f"{'method':8} {'pair':6} {'n':>5} {'top1':>6} {'mrr':>6} {'score':>7}")
    for name, fit in trainers.items():
        t0 = time.perf_counter()
        lists = evaluate_test_set(fit(), test)
        for rl in lists:
            print(f"{name:8} {'-'.join(rl.pair):6} {rl.n:5d} {np.mean(rl.ranks == 1):6.3f} "
                  f"{mrr(rl):6.3f} {retrieval_score(rl)[0]:7.2f}")
        print(f"{name:8} AMRR {amrr([mrr(rl) for rl in lists]):.3f}  ({time.perf_counter() - t0:.1f} s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
