"""Command-line interface: ``python -m xlnews <command> ...``.

Every command writes its results into the directory given by ``--out``
together with ``run.meta``, the effective configuration.  Exit status is 0 on
success, 1 for usage errors and 2 for bad or inconsistent input data; files a
failed command had started to write are removed.
"""
from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
import time
from collections import defaultdict
from contextlib import nullcontext
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .binfmt import ContainerFormatError
from .config import RunConfig, load_config
from .corpus import (CorpusError, EmptyPairs, RandomFraction, as_test_set, import_corpus,
                     load_corpus, save_corpus, split_train_test)
from .evalkit import evaluate_test_set, summarize, write_report
from .eventlink import (FEATURE_GROUPS, FEATURE_NAMES, LinkFeatureVector, extract_features,
                        kfold_cv, read_clusters, read_labelled_pairs, save_linker, train_linker,
                        write_clusters)
from .eventlink.pipeline import (StreamConfig, candidate_pairs, cluster_stream, knn_links,
                                 read_stream, stream_vectors)
from .textvec import Vocabulary, build_vocabulary, read_documents, stack_columns, vectorize_many
from .xmodels import (load_model, project, project_collection, save_model, topk_blocked,
                      train_cca_model, train_hubcca_model, train_kmeans_model, train_lsi_model)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# configuration keys exposed as flags, per command
COMMAND_KEYS = {
    "vocab": ["min_df", "top_k_drop"],
    "corpus": ["min_df", "top_k_drop", "min_distinct_terms", "hub", "test_fraction",
               "test_empty_pairs"],
    "train": ["method", "k", "k_lsi", "k_cca", "kappa", "oversample", "power_iters", "hub",
              "cca_langs"],
    "project": [],
    "knn": ["knn_k"],
    "eval-mate": [],
    "cluster-stream": ["threshold", "max_age_days", "idf_window_days", "promote_at"],
    "candidates": ["knn_k", "idf_window_days", "promote_at", "window_hours"],
    "features": [],
    "train-linker": ["C", "feature_groups"],
    "eval-linker": ["C", "folds", "feature_groups"],
    "bench-sims": ["knn_k", "bench_dim", "bench_queries", "bench_targets", "bench_repeats"],
}
GLOBAL_KEYS = ["seed", "threads", "block_size"]


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _add_keys(p: argparse.ArgumentParser, keys: Sequence[str]) -> None:
    defaults = RunConfig()
    for key in keys:
        value = getattr(defaults, key)
        p.add_argument(_flag(key), dest=key, default=argparse.SUPPRESS, type=type(value),
                       metavar=type(value).__name__.upper(), help=f"default: {value!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _add_keys(common, GLOBAL_KEYS)
    common.add_argument("--config", help="file of 'key = value' lines; flags take precedence")
    common.add_argument("--out", required=True, help="output directory")

    root = _Parser(prog="xlnews", description="Cross-lingual document similarity and event linking.")
    root.add_argument("--version", action="version", version=f"xlnews {__version__}")
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name: str, help_text: str):
        p = sub.add_parser(name, parents=[common], help=help_text)
        _add_keys(p, COMMAND_KEYS[name])
        return p

    p = cmd("vocab", "build per-language vocabularies from document JSONL files")
    p.add_argument("--docs", action="append", required=True)

    p = cmd("corpus", "import an aligned comparable corpus, optionally with a test split")
    p.add_argument("--docs", action="append", required=True)
    p.add_argument("--alignment", required=True)
    p.add_argument("--vocab", action="append", default=[], metavar="LANG=PATH")

    p = cmd("train", "train a projection model")
    p.add_argument("--corpus", required=True)

    p = cmd("project", "project documents into the shared space")
    p.add_argument("--model", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--vocab", action="append", required=True, metavar="LANG=PATH")

    p = cmd("knn", "k nearest cross-lingual neighbours of query documents")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--vocab", action="append", required=True, metavar="LANG=PATH")

    p = cmd("eval-mate", "mate retrieval scores and AMRR on a held-out corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)

    p = cmd("cluster-stream", "online clustering of timestamped article streams")
    p.add_argument("--stream", action="append", required=True)
    p.add_argument("--vocab", action="append", required=True, metavar="LANG=PATH")

    p = cmd("candidates", "cross-lingual candidate cluster pairs")
    p.add_argument("--model", required=True)
    p.add_argument("--stream", action="append", required=True)
    p.add_argument("--vocab", action="append", required=True, metavar="LANG=PATH")
    p.add_argument("--clusters", action="append", required=True)

    p = cmd("features", "link features for cluster pairs")
    p.add_argument("--clusters", action="append", required=True)
    p.add_argument("--links", required=True)
    p.add_argument("--pairs", required=True)

    p = cmd("train-linker", "train the linear link classifier")
    p.add_argument("--features", required=True)

    p = cmd("eval-linker", "k-fold cross-validation of the link classifier")
    p.add_argument("--features", required=True)

    cmd("bench-sims", "throughput of blocked projected-cosine kNN")
    return root


# --- output bookkeeping ----------------------------------------------------------

class Output:
    """Files and directories written by one command, for cleanup on failure."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.created_root = not self.path.exists()
        if self.path.exists() and not self.path.is_dir():
            raise UsageError(f"--out {path} exists and is not a directory")
        self.path.mkdir(parents=True, exist_ok=True)
        self.items: list[Path] = []

    def file(self, name: str) -> Path:
        p = self.path / name
        self.items.append(p)
        return p

    def cleanup(self) -> None:
        for p in reversed(self.items):
            for q in (p, Path(str(p) + ".tmp")):
                if q.is_dir():
                    shutil.rmtree(q, ignore_errors=True)
                elif q.exists():
                    q.unlink()
        if self.created_root:
            shutil.rmtree(self.path, ignore_errors=True)


def _write_meta(out: Output, command: str, args: argparse.Namespace, cfg: RunConfig) -> None:
    lines = [f"command = {command}\n"]
    for key, val in sorted(vars(args).items()):
        if key in ("command", "config") or key in RunConfig.keys():
            continue
        if isinstance(val, list):
            val = ",".join(val)
        lines.append(f"{key} = {val}\n")
    out.file("run.meta").write_text("".join(lines) + cfg.echo(), encoding="utf-8")


# --- helpers -----------------------------------------------------------------------

def _lang_paths(specs: Sequence[str], what: str) -> dict[str, str]:
    out = {}
    for s in specs:
        if "=" not in s:
            raise UsageError(f"{what} must be given as LANG=PATH, got {s!r}")
        lang, path = s.split("=", 1)
        out[lang] = path
    return out


def _docs_by_lang(paths: Sequence[str]):
    by_lang = defaultdict(list)
    for p in paths:
        for d in read_documents(p):
            by_lang[d.lang].append(d)
    return dict(by_lang)


def _vocabs(specs: Sequence[str]) -> dict[str, Vocabulary]:
    return {lang: Vocabulary.load(path, lang) for lang, path in _lang_paths(specs, "--vocab").items()}


def _check_vocab(model, lang: str, vocab: Vocabulary) -> None:
    digest = model.vocab_digests[model.lang_index(lang)]
    if digest and digest != vocab.digest():
        raise DataError(f"vocabulary for {lang!r} does not match the one the model was trained on")


def _single_lang(docs, what: str) -> str:
    langs = {d.lang for d in docs}
    if len(langs) != 1:
        raise DataError(f"{what} must hold documents of exactly one language, found {sorted(langs)}")
    return langs.pop()


def _fmt(x: float) -> str:
    return repr(float(x))


def _streams(paths: Sequence[str]):
    by_lang = defaultdict(list)
    for p in paths:
        for ad in read_stream(p):
            by_lang[ad.doc.lang].append(ad)
    for docs in by_lang.values():
        docs.sort(key=lambda ad: (ad.doc.timestamp, ad.doc.id))
    return dict(by_lang)


def _feature_names(groups: str) -> tuple[str, ...]:
    if groups == "all":
        return FEATURE_NAMES
    names = []
    for g in groups.split(","):
        if g.strip() not in FEATURE_GROUPS:
            raise UsageError(f"unknown feature group {g!r}; choose from {sorted(FEATURE_GROUPS)}")
        names += FEATURE_GROUPS[g.strip()]
    return tuple(n for n in FEATURE_NAMES if n in names)


FEATURE_HEADER = ["cluster_a", "cluster_b", "label", *FEATURE_NAMES]


def _read_features(path: str):
    X, y, pairs = [], [], []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        if next(reader, None) != FEATURE_HEADER:
            raise DataError(f"{path}: unexpected feature table header")
        for rec in reader:
            if rec[2] not in ("0", "1"):
                raise DataError(f"{path}: pair {rec[0]}/{rec[1]} has no 0/1 label")
            pairs.append((rec[0], rec[1]))
            y.append(int(rec[2]))
            X.append([float(v) for v in rec[3:]])
    if not X:
        raise DataError(f"{path}: no examples")
    return pairs, np.array(X), np.array(y)


# --- commands -----------------------------------------------------------------------

def cmd_vocab(args, cfg, out):
    for lang, docs in sorted(_docs_by_lang(args.docs).items()):
        build_vocabulary(docs, cfg.min_df, cfg.top_k_drop).save(out.file(f"vocab.{lang}.tsv"))


def cmd_corpus(args, cfg, out):
    docs = _docs_by_lang(args.docs)
    vocabs = _vocabs(args.vocab) if args.vocab else None
    corpus, report = import_corpus(docs, args.alignment, cfg.hub or None, cfg.min_df,
                                   cfg.top_k_drop, cfg.min_distinct_terms, vocabs)
    out.file("import_report.json").write_text(json.dumps({
        "rows_read": report.rows_read, "dropped_rows": report.dropped_rows,
        "stub_docs": report.stub_docs, "empty_vectors": report.empty_vectors,
        "notes": report.notes, "langs": corpus.langs, "s": corpus.s, "dims": corpus.dims},
        sort_keys=True, indent=1) + "\n")
    selector = None
    if cfg.test_empty_pairs:
        selector = EmptyPairs(tuple(tuple(p.split("-", 1)) for p in cfg.test_empty_pairs.split(",")))
    elif cfg.test_fraction > 0:
        selector = RandomFraction(cfg.test_fraction)
    if selector is None:
        save_corpus(corpus, out.file("corpus"))
        return
    train, test = split_train_test(corpus, selector, cfg.seed)
    save_corpus(train, out.file("train"))
    save_corpus(corpus.subset(test.columns), out.file("test"))


def cmd_train(args, cfg, out):
    corpus = load_corpus(args.corpus)
    if cfg.method == "kmeans":
        model = train_kmeans_model(corpus, cfg.k, cfg.seed)
    elif cfg.method == "lsi":
        model = train_lsi_model(corpus, cfg.k, cfg.seed, cfg.oversample, cfg.power_iters)
    elif cfg.method == "cca":
        langs = tuple(cfg.cca_langs.split(",")) if cfg.cca_langs else None
        model = train_cca_model(corpus, cfg.k, cfg.kappa, langs)
    elif cfg.method == "hubcca":
        hub = corpus.lang_index(cfg.hub) if cfg.hub else 0
        model = train_hubcca_model(corpus, hub, cfg.k_lsi, cfg.k_cca or None, cfg.kappa, cfg.seed,
                                   cfg.oversample, cfg.power_iters)
    else:
        raise UsageError(f"unknown method {cfg.method!r}")
    save_model(model, out.file("model.xlem"))
    diag = {"method": model.method, "langs": model.langs, "dims": model.dims}
    for key in ("singular_values", "eigvals", "objective", "degraded", "excluded", "ridge"):
        if key in model.diagnostics:
            v = model.diagnostics[key]
            diag[key] = np.asarray(v).tolist() if not isinstance(v, list) or (v and not isinstance(v[0], str)) else v
    if "correlations" in model.diagnostics:
        c = model.diagnostics["correlations"]
        diag["correlations"] = [np.asarray(x).tolist() for x in c] if isinstance(c, list) else np.asarray(c).tolist()
    out.file("train_info.json").write_text(json.dumps(diag, sort_keys=True, indent=1) + "\n")


def cmd_project(args, cfg, out):
    model = load_model(args.model)
    vocabs = _vocabs(args.vocab)
    by_lang = _docs_by_lang([args.docs])
    with open(out.file("projections.tsv"), "w", encoding="utf-8") as fh:
        fh.write("id\tlang\t" + "\t".join(f"z{i}" for i in range(model.k)) + "\n")
        for lang in sorted(by_lang):
            if lang not in vocabs:
                raise DataError(f"no --vocab given for language {lang!r}")
            _check_vocab(model, lang, vocabs[lang])
            docs = by_lang[lang]
            Z = project(model, lang, vectorize_many(docs, vocabs[lang]))
            for d, z in zip(docs, Z.T):
                fh.write(f"{d.id}\t{lang}\t" + "\t".join(_fmt(v) for v in z) + "\n")


def cmd_knn(args, cfg, out):
    model = load_model(args.model)
    vocabs = _vocabs(args.vocab)
    queries, targets = list(read_documents(args.queries)), list(read_documents(args.targets))
    lq, lt = _single_lang(queries, "--queries"), _single_lang(targets, "--targets")
    for lang in (lq, lt):
        if lang not in vocabs:
            raise DataError(f"no --vocab given for language {lang!r}")
        _check_vocab(model, lang, vocabs[lang])
    Zq = project_collection(model, lq, vectorize_many(queries, vocabs[lq]))
    Zt = project_collection(model, lt, vectorize_many(targets, vocabs[lt]))
    res = topk_blocked(Zq, Zt, cfg.knn_k, cfg.block_size)
    with open(out.file("knn.tsv"), "w", encoding="utf-8") as fh:
        fh.write("query\trank\ttarget\tscore\n")
        for q, d in enumerate(queries):
            for r, (t, s) in enumerate(res.row(q), 1):
                fh.write(f"{d.id}\t{r}\t{targets[t].id}\t{_fmt(s)}\n")


def cmd_eval_mate(args, cfg, out):
    model = load_model(args.model)
    test = as_test_set(load_corpus(args.test))
    lists = evaluate_test_set(model, test, block=cfg.block_size)
    if not lists:
        raise DataError("the test corpus has no language pair with two or more mates")
    rows, total = summarize(lists)
    write_report(out.file("report.tsv"), rows, total)
    with open(out.file("ranks.tsv"), "w", encoding="utf-8") as fh:
        fh.write("pair\tindex\trank\n")
        for rl in lists:
            for i, r in enumerate(rl.ranks):
                fh.write(f"{rl.pair[0]}-{rl.pair[1]}\t{i}\t{r}\n")


def _stream_config(cfg) -> StreamConfig:
    return StreamConfig(cfg.threshold, cfg.max_age_days, cfg.idf_window_days, cfg.promote_at)


def cmd_cluster_stream(args, cfg, out):
    vocabs = _vocabs(args.vocab)
    for lang, docs in sorted(_streams(args.stream).items()):
        if lang not in vocabs:
            raise DataError(f"no --vocab given for language {lang!r}")
        res = cluster_stream(docs, vocabs[lang], _stream_config(cfg))
        write_clusters(out.file(f"clusters.{lang}.jsonl"), res.clusters)
        with open(out.file(f"assignments.{lang}.tsv"), "w", encoding="utf-8") as fh:
            fh.write("article\tcluster\n")
            for a, c in res.article_cluster.items():
                fh.write(f"{a}\t{c}\n")


def cmd_candidates(args, cfg, out):
    model = load_model(args.model)
    vocabs = _vocabs(args.vocab)
    vecs = []
    for lang, docs in sorted(_streams(args.stream).items()):
        if lang not in vocabs:
            raise DataError(f"no --vocab given for language {lang!r}")
        _check_vocab(model, lang, vocabs[lang])
        vecs.append(stream_vectors(docs, vocabs[lang], cfg.idf_window_days))
    links = knn_links(model, vecs, cfg.knn_k, cfg.window_hours if cfg.window_hours > 0 else None,
                      cfg.block_size)
    with open(out.file("links.jsonl"), "w", encoding="utf-8") as fh:
        for a in sorted(links):
            fh.write(json.dumps({"article": a, "links": {l: [[b, s] for b, s in links[a][l]]
                                                         for l in sorted(links[a])}}) + "\n")
    clusters = defaultdict(list)
    for p in args.clusters:
        for c in read_clusters(p):
            clusters[c.lang].append(c)
    events = {l: [c for c in cs if c.size >= cfg.promote_at] for l, cs in clusters.items()}
    with open(out.file("candidates.tsv"), "w", encoding="utf-8") as fh:
        for la in sorted(events):
            for lb in sorted(events):
                if la != lb:
                    for ca, cb in candidate_pairs(events[la], events[lb], links):
                        fh.write(f"{ca.id}\t{cb.id}\n")


def _read_links(path: str):
    links = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                links[rec["article"]] = {l: [(b, float(s)) for b, s in v] for l, v in rec["links"].items()}
    return links


def cmd_features(args, cfg, out):
    by_id = {}
    for p in args.clusters:
        for c in read_clusters(p):
            by_id[c.id] = c
    links = _read_links(args.links)
    rows = []
    with open(args.pairs, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if not parts[0]:
                continue
            if len(parts) not in (2, 3):
                raise DataError(f"{args.pairs}:{lineno}: expected two cluster ids and an optional label")
            for cid in parts[:2]:
                if cid not in by_id:
                    raise DataError(f"{args.pairs}:{lineno}: unknown cluster {cid!r}")
            rows.append((parts[0], parts[1], parts[2] if len(parts) == 3 else "-"))
    with open(out.file("features.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\t".join(FEATURE_HEADER) + "\n")
        for a, b, label in rows:
            fv = extract_features(by_id[a], by_id[b], links)
            fh.write(f"{a}\t{b}\t{label}\t" + "\t".join(_fmt(v) for v in fv.to_array()) + "\n")


def cmd_train_linker(args, cfg, out):
    _, X, y = _read_features(args.features)
    model = train_linker((X, y), cfg.C, cfg.seed, feature_names=_feature_names(cfg.feature_groups))
    save_linker(model, out.file("linker.xlnk"))
    out.file("linker.json").write_text(json.dumps({
        "features": list(model.feature_names), "weights": model.weights.tolist(),
        "bias": model.bias, "mean": model.mean.tolist(), "scale": model.scale.tolist(),
        "config": model.config}, sort_keys=True, indent=1) + "\n")


def cmd_eval_linker(args, cfg, out):
    _, X, y = _read_features(args.features)
    res = kfold_cv((X, y), cfg.folds, cfg.seed, cfg.C, _feature_names(cfg.feature_groups))
    metrics = ("accuracy", "precision", "recall", "f1")
    with open(out.file("cv.tsv"), "w", encoding="utf-8") as fh:
        fh.write("fold\t" + "\t".join(metrics) + "\n")
        for f, row in enumerate(res.per_fold):
            fh.write(f"{f}\t" + "\t".join(f"{row[m]:.6f}" for m in metrics) + "\n")
        fh.write("mean\t" + "\t".join(f"{res.mean(m):.6f}" for m in metrics) + "\n")
        fh.write("std\t" + "\t".join(f"{res.std(m):.6f}" for m in metrics) + "\n")


def bench_sims(dim: int, n_queries: int, n_targets: int, k_nn: int = 10, block: int = 1024,
               seed: int = 0, repeats: int = 1) -> dict:
    """Time exact top-``k_nn`` search over unit vectors; returns counts and the
    best similarities-per-second over ``repeats`` runs."""
    rng = np.random.default_rng(seed)
    Zq = rng.standard_normal((dim, n_queries))
    Zt = rng.standard_normal((dim, n_targets))
    Zq /= np.linalg.norm(Zq, axis=0)
    Zt /= np.linalg.norm(Zt, axis=0)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        topk_blocked(Zq, Zt, k_nn, block)
        best = min(best, time.perf_counter() - t0)
    sims = n_queries * n_targets
    return {"dim": dim, "queries": n_queries, "targets": n_targets, "sims": sims,
            "seconds": best, "sims_per_second": sims / best}


def cmd_bench_sims(args, cfg, out):
    r = bench_sims(cfg.bench_dim, cfg.bench_queries, cfg.bench_targets, cfg.knn_k,
                   cfg.block_size, cfg.seed, cfg.bench_repeats)
    keys = list(r)
    out.file("bench.tsv").write_text("\t".join(keys) + "\n" +
                                     "\t".join(str(r[k]) for k in keys) + "\n")
    print(f"{r['sims_per_second']:.0f} similarities/second "
          f"({r['sims']} in {r['seconds']:.2f} s, dim {r['dim']})")


COMMANDS = {
    "vocab": cmd_vocab, "corpus": cmd_corpus, "train": cmd_train, "project": cmd_project,
    "knn": cmd_knn, "eval-mate": cmd_eval_mate, "cluster-stream": cmd_cluster_stream,
    "candidates": cmd_candidates, "features": cmd_features, "train-linker": cmd_train_linker,
    "eval-linker": cmd_eval_linker, "bench-sims": cmd_bench_sims,
}

DATA_ERRORS = (DataError, CorpusError, ContainerFormatError, ValueError, KeyError, OSError,
               json.JSONDecodeError)


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:          # --help / --version
        return int(e.code or 0)

    cfg = RunConfig()
    try:
        if args.config:
            cfg.update(load_config(args.config))
        cfg.update({k: v for k, v in vars(args).items() if k in RunConfig.keys()})
    except (OSError, KeyError, ValueError) as e:
        print(f"xlnews: bad configuration: {e}", file=sys.stderr)
        return 1

    try:
        out = Output(args.out)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    limits = nullcontext()
    if cfg.threads > 0:
        from threadpoolctl import threadpool_limits
        limits = threadpool_limits(limits=cfg.threads)
    try:
        with limits:
            COMMANDS[args.command](args, cfg, out)
            _write_meta(out, args.command, args, cfg)
    except UsageError as e:
        out.cleanup()
        print(f"xlnews {args.command}: {e}", file=sys.stderr)
        return 1
    except DATA_ERRORS as e:
        out.cleanup()
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"xlnews {args.command}: {msg}", file=sys.stderr)
        return 2
    except BaseException:
        out.cleanup()
        raise
    return 0


def main() -> None:
    sys.exit(run())
