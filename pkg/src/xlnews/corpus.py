"""Comparable multilingual corpora with missing alignments.

A corpus holds one sparse ``n_i x s`` TFIDF matrix per language.  Column
``l`` of every matrix belongs to the same multilingual document; a language
that has no document for that column is marked absent in ``present`` and its
column is all zero.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .textvec import (Document, SparseVector, Vocabulary, build_vocabulary, column_vector,
                      read_documents, vectorize_many)

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


@dataclass
class ComparableCorpus:
    langs: list[str]
    X: list[sp.csc_matrix]
    present: np.ndarray
    doc_ids: list[list[str | None]] | None = None
    vocabs: list[Vocabulary] | None = None

    def __post_init__(self):
        self.X = [sp.csc_matrix(x, dtype=np.float64) for x in self.X]
        for x in self.X:
            x.sort_indices()
        self.present = np.asarray(self.present, dtype=bool)
        self.validate()

    def validate(self) -> None:
        m = len(self.langs)
        if len(set(self.langs)) != m:
            raise CorpusError("duplicate language codes")
        if len(self.X) != m or self.present.ndim != 2 or self.present.shape[1] != m:
            raise CorpusError("need one matrix and one mask column per language")
        s = self.present.shape[0]
        for i, x in enumerate(self.X):
            if x.shape[1] != s:
                raise CorpusError(f"{self.langs[i]}: {x.shape[1]} columns, expected {s}")
            nonzero = np.diff(x.indptr) > 0
            if np.any(nonzero & ~self.present[:, i]):
                raise CorpusError(f"{self.langs[i]}: nonzero column marked absent")
            if np.any(~nonzero & self.present[:, i]):
                raise CorpusError(f"{self.langs[i]}: zero column marked present")
        counts = self.present.sum(axis=1)
        if np.any(counts < 2):
            bad = int(np.flatnonzero(counts < 2)[0])
            raise CorpusError(f"multilingual document {bad} has fewer than two languages")

    @property
    def m(self) -> int:
        return len(self.langs)

    @property
    def s(self) -> int:
        return self.present.shape[0]

    @property
    def dims(self) -> list[int]:
        return [x.shape[0] for x in self.X]

    def lang_index(self, lang: str) -> int:
        try:
            return self.langs.index(lang)
        except ValueError:
            raise KeyError(f"unknown language {lang!r}") from None

    def stacked(self) -> sp.csc_matrix:
        return sp.vstack(self.X, format="csc")

    def subset(self, columns, langs: Sequence[str] | None = None) -> "ComparableCorpus":
        """Columns ``columns`` restricted to ``langs``; columns left with fewer
        than two languages are dropped."""
        columns = np.asarray(columns, dtype=np.int64)
        li = list(range(self.m)) if langs is None else [self.lang_index(l) for l in langs]
        present = self.present[np.ix_(columns, li)] if columns.size else np.zeros((0, len(li)), bool)
        keep = columns[present.sum(axis=1) >= 2]
        present = self.present[np.ix_(keep, li)] if keep.size else np.zeros((0, len(li)), bool)
        ids = None
        if self.doc_ids is not None:
            ids = [[self.doc_ids[i][c] for c in keep] for i in li]
        vocabs = None if self.vocabs is None else [self.vocabs[i] for i in li]
        return ComparableCorpus([self.langs[i] for i in li], [self.X[i][:, keep] for i in li],
                                present, ids, vocabs)


@dataclass
class AlignmentIndex:
    a_single: list[np.ndarray]
    a_pair: dict[tuple[int, int], np.ndarray]

    def pair(self, i: int, j: int) -> np.ndarray:
        return self.a_pair[(i, j)]


def alignment_index(corpus: ComparableCorpus) -> AlignmentIndex:
    P = corpus.present
    single = [np.flatnonzero(P[:, i]) for i in range(corpus.m)]
    pairs = {}
    for i in range(corpus.m):
        for j in range(corpus.m):
            if i != j:
                pairs[(i, j)] = np.flatnonzero(P[:, i] & P[:, j])
    return AlignmentIndex(single, pairs)


def filter_stubs(docs: Iterable[Document], min_distinct_terms: int) -> list[Document]:
    """Drop documents with fewer than ``min_distinct_terms`` distinct tokens."""
    if min_distinct_terms < 0:
        raise ValueError("min_distinct_terms must be >= 0")
    return [d for d in docs if len(set(d.tokens)) >= min_distinct_terms]


def read_alignment(path: str | Path) -> tuple[list[str], list[list[str | None]]]:
    """Alignment TSV: a ``#lang1<TAB>lang2...`` header, then one row of doc ids
    per multilingual document with empty cells for missing languages."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#"):
            raise CorpusError(f"{path}: first line must be '#lang<TAB>lang...'")
        langs = header[1:].split("\t")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            if len(cells) != len(langs):
                raise CorpusError(f"{path}:{lineno}: expected {len(langs)} cells, got {len(cells)}")
            rows.append([c or None for c in cells])
    return langs, rows


def write_alignment(path: str | Path, langs: Sequence[str], rows: Iterable[Sequence[str | None]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#" + "\t".join(langs) + "\n")
        for r in rows:
            fh.write("\t".join(c or "" for c in r) + "\n")


@dataclass
class ImportReport:
    rows_read: int = 0
    dropped_rows: int = 0
    stub_docs: int = 0
    empty_vectors: int = 0
    notes: list[str] = field(default_factory=list)


def import_corpus(docs: Mapping[str, Iterable[Document] | str | Path],
                  alignment: str | Path | tuple[Sequence[str], Sequence[Sequence[str | None]]],
                  hub: str | None = None, min_df: int = 1, top_k_drop: int = 0,
                  min_distinct_terms: int = 0,
                  vocabs: Mapping[str, Vocabulary] | None = None,
                  ) -> tuple[ComparableCorpus, ImportReport]:
    """Build a corpus from per-language documents and an alignment table.

    Stubs are treated as missing cells.  Rows with fewer than two remaining
    cells are dropped and counted.  Unless ``vocabs`` is given, each
    language's vocabulary and IDF come from its documents that are aligned with
    the hub (all of its documents if there are none); the hub uses all of its
    aligned documents.  Columns are stored unit-normalized.
    """
    report = ImportReport()
    langs, rows = read_alignment(alignment) if isinstance(alignment, (str, Path)) else (
        list(alignment[0]), [list(r) for r in alignment[1]])
    if hub is not None:
        if hub not in langs:
            raise CorpusError(f"hub language {hub!r} not in alignment header")
        order = [langs.index(hub)] + [i for i, l in enumerate(langs) if l != hub]
        langs = [langs[i] for i in order]
        rows = [[r[i] for i in order] for r in rows]
    report.rows_read = len(rows)

    by_lang: dict[str, dict[str, Document]] = {}
    for lang in langs:
        src = docs.get(lang, ())
        stream = read_documents(src) if isinstance(src, (str, Path)) else src
        table: dict[str, Document] = {}
        for d in stream:
            if d.lang != lang:
                raise CorpusError(f"document {d.id!r} has lang {d.lang!r}, expected {lang!r}")
            if d.id in table:
                raise CorpusError(f"duplicate document id {d.id!r} in {lang}")
            table[d.id] = d
        by_lang[lang] = table

    stubs = set()
    if min_distinct_terms:
        for lang, table in by_lang.items():
            kept = {d.id for d in filter_stubs(table.values(), min_distinct_terms)}
            stubs |= {(lang, i) for i in table if i not in kept}
    report.stub_docs = len(stubs)

    cells: list[list[str | None]] = []
    for r in rows:
        row = []
        for lang, did in zip(langs, r):
            if did is not None and did not in by_lang[lang]:
                raise CorpusError(f"alignment references unknown {lang} document {did!r}")
            row.append(None if did is None or (lang, did) in stubs else did)
        if sum(c is not None for c in row) >= 2:
            cells.append(row)
        else:
            report.dropped_rows += 1

    m = len(langs)
    if vocabs is None:
        vocab_list = []
        for i, lang in enumerate(langs):
            if i == 0:
                basis = [r[0] for r in cells if r[0] is not None]
            else:
                basis = [r[i] for r in cells if r[i] is not None and r[0] is not None]
                if not basis:
                    basis = [r[i] for r in cells if r[i] is not None]
            if not basis:
                raise CorpusError(f"language {lang!r} has no aligned documents")
            vocab_list.append(build_vocabulary([by_lang[lang][d] for d in basis], min_df, top_k_drop))
    else:
        vocab_list = [vocabs[lang] for lang in langs]

    mats, present = [], np.zeros((len(cells), m), bool)
    for i, lang in enumerate(langs):
        col_docs = [by_lang[lang][r[i]] if r[i] is not None else None for r in cells]
        placeholder = Document("_", lang, ())
        X = vectorize_many([d or placeholder for d in col_docs], vocab_list[i], normalize=True)
        nonzero = np.diff(X.indptr) > 0
        report.empty_vectors += int(sum(1 for d, nz in zip(col_docs, nonzero) if d and not nz))
        present[:, i] = nonzero
        mats.append(X)
        for j, nz in enumerate(nonzero):
            if not nz:
                cells[j][i] = None
    keep = np.flatnonzero(present.sum(axis=1) >= 2)
    report.dropped_rows += len(cells) - keep.size
    if report.dropped_rows:
        log.info("dropped %d alignment rows with fewer than two nonempty documents",
                 report.dropped_rows)
    ids = [[cells[j][i] for j in keep] for i in range(m)]
    corpus = ComparableCorpus(langs, [x[:, keep] for x in mats], present[keep], ids, vocab_list)
    return corpus, report


# --- test/train splitting --------------------------------------------------

@dataclass(frozen=True)
class ExplicitColumns:
    """Test set given by column indices or by any document id in the column."""
    items: frozenset


@dataclass(frozen=True)
class RandomFraction:
    fraction: float


@dataclass(frozen=True)
class EmptyPairs:
    """Move every column aligned in any of ``pairs`` to the test set, leaving
    those pairs with empty training alignment."""
    pairs: tuple[tuple[str, str], ...]


@dataclass
class TestSet:
    __test__ = False

    langs: list[str]
    columns: np.ndarray
    pairs: dict[tuple[int, int], tuple[sp.csc_matrix, sp.csc_matrix]]

    def pair_vectors(self, i: int, j: int) -> list[tuple[SparseVector, SparseVector]]:
        A, B = self.pairs[(i, j)] if i < j else self.pairs[(j, i)][::-1]
        return [(column_vector(A, c), column_vector(B, c)) for c in range(A.shape[1])]

    def matrices(self, i: int, j: int) -> tuple[sp.csc_matrix, sp.csc_matrix]:
        return self.pairs[(i, j)] if i < j else self.pairs[(j, i)][::-1]

    def __len__(self) -> int:
        return int(self.columns.size)


def split_train_test(corpus: ComparableCorpus, selector, seed: int = 0
                     ) -> tuple[ComparableCorpus, TestSet]:
    s = corpus.s
    test_mask = np.zeros(s, bool)
    if isinstance(selector, ExplicitColumns):
        for item in selector.items:
            if isinstance(item, (int, np.integer)):
                test_mask[int(item)] = True
            elif corpus.doc_ids is not None:
                for ids in corpus.doc_ids:
                    for c, d in enumerate(ids):
                        if d == item:
                            test_mask[c] = True
    elif isinstance(selector, RandomFraction):
        if not 0.0 <= selector.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        rng = np.random.default_rng(seed)
        n_test = int(round(selector.fraction * s))
        test_mask[rng.permutation(s)[:n_test]] = True
    elif isinstance(selector, EmptyPairs):
        for a, b in selector.pairs:
            i, j = corpus.lang_index(a), corpus.lang_index(b)
            test_mask |= corpus.present[:, i] & corpus.present[:, j]
    else:
        raise TypeError(f"unknown selector {selector!r}")
    train_cols = np.flatnonzero(~test_mask)
    test_cols = np.flatnonzero(test_mask)
    if train_cols.size == 0:
        raise CorpusError("selector leaves an empty training set")
    train = corpus.subset(train_cols)
    pairs = {}
    for i, j in combinations(range(corpus.m), 2):
        both = test_cols[corpus.present[test_cols, i] & corpus.present[test_cols, j]]
        if both.size:
            pairs[(i, j)] = (corpus.X[i][:, both], corpus.X[j][:, both])
    return train, TestSet(list(corpus.langs), test_cols, pairs)


def as_test_set(corpus: ComparableCorpus) -> TestSet:
    """Treat every column of ``corpus`` as held out (for a saved test corpus)."""
    cols = np.arange(corpus.s)
    pairs = {}
    for i, j in combinations(range(corpus.m), 2):
        both = cols[corpus.present[:, i] & corpus.present[:, j]]
        if both.size:
            pairs[(i, j)] = (corpus.X[i][:, both], corpus.X[j][:, both])
    return TestSet(list(corpus.langs), cols, pairs)


# --- container --------------------------------------------------------------

def write_triplets(path: str | Path, X: sp.spmatrix) -> None:
    X = sp.csc_matrix(X)
    X.sort_indices()
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"dims {X.shape[0]} {X.shape[1]} {X.nnz}\n")
        for c in range(X.shape[1]):
            for p in range(X.indptr[c], X.indptr[c + 1]):
                fh.write(f"{X.indices[p]} {c} {float(X.data[p])!r}\n")


def read_triplets(path: str | Path) -> sp.csc_matrix:
    with open(path, encoding="ascii") as fh:
        head = fh.readline().split()
        if len(head) != 4 or head[0] != "dims":
            raise CorpusError(f"{path}: bad header")
        n, s, nnz = map(int, head[1:])
        rows, cols, vals = np.zeros(nnz, np.int64), np.zeros(nnz, np.int64), np.zeros(nnz)
        count = 0
        for line in fh:
            if not line.strip():
                continue
            if count >= nnz:
                raise CorpusError(f"{path}: more entries than declared")
            r, c, v = line.split()
            rows[count], cols[count], vals[count] = int(r), int(c), float(v)
            count += 1
    if count != nnz:
        raise CorpusError(f"{path}: expected {nnz} entries, found {count}")
    X = sp.csc_matrix((vals, (rows, cols)), shape=(n, s))
    X.sort_indices()
    return X


def save_corpus(corpus: ComparableCorpus, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "meta.json").write_text(json.dumps({"langs": corpus.langs, "hub": corpus.langs[0]}) + "\n")
    for i, lang in enumerate(corpus.langs):
        write_triplets(d / f"X.{lang}.txt", corpus.X[i])
        if corpus.vocabs is not None:
            corpus.vocabs[i].save(d / f"vocab.{lang}.tsv")
    with open(d / "mask.csv", "w") as fh:
        fh.write(",".join(corpus.langs) + "\n")
        for row in corpus.present:
            fh.write(",".join("1" if v else "0" for v in row) + "\n")
    if corpus.doc_ids is not None:
        write_alignment(d / "alignment.tsv", corpus.langs, zip(*corpus.doc_ids))


def load_corpus(directory: str | Path) -> ComparableCorpus:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    langs = meta["langs"]
    X = [read_triplets(d / f"X.{lang}.txt") for lang in langs]
    with open(d / "mask.csv") as fh:
        header = fh.readline().strip().split(",")
        if header != langs:
            raise CorpusError("mask.csv header does not match meta.json")
        mask = [[v == "1" for v in line.strip().split(",")] for line in fh if line.strip()]
    present = np.array(mask, bool).reshape(-1, len(langs))
    vocabs = None
    if all((d / f"vocab.{lang}.tsv").exists() for lang in langs):
        vocabs = [Vocabulary.load(d / f"vocab.{lang}.tsv", lang) for lang in langs]
    ids = None
    if (d / "alignment.tsv").exists():
        _, rows = read_alignment(d / "alignment.tsv")
        ids = [list(col) for col in zip(*rows)] if rows else [[] for _ in langs]
    return ComparableCorpus(langs, X, present, ids, vocabs)
