import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlnews.corpus import (ComparableCorpus, CorpusError, EmptyPairs, ExplicitColumns,
                           RandomFraction, alignment_index, filter_stubs, import_corpus,
                           load_corpus, save_corpus, split_train_test)
from xlnews.textvec import Document


def D(lang, i, words):
    return Document(f"{lang}{i}", lang, tuple(words.split()))


DOCS = {
    "en": [D("en", i, w) for i, w in enumerate(["cat dog", "dog fish", "fish bird", "bird cat"])],
    "es": [D("es", i, w) for i, w in enumerate(["gato perro", "perro pez", "pez ave", "ave gato"])],
    "de": [D("de", i, w) for i, w in enumerate(["katze hund", "hund fisch", "fisch vogel", "vogel katze"])],
}


def test_import_fully_aligned():
    rows = [[f"en{i}", f"es{i}"] for i in range(3)]
    corpus, rep = import_corpus(DOCS, (["en", "es"], rows))
    assert corpus.s == 3 and corpus.present.all() and rep.dropped_rows == 0
    for x in corpus.X:
        norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=0)).ravel())
        assert np.allclose(norms, 1.0)


def test_import_drops_single_language_rows():
    rows = [["en0", "es0"], ["en1", None], ["en2", "es2"]]
    corpus, rep = import_corpus(DOCS, (["en", "es"], rows))
    assert rep.dropped_rows == 1 and corpus.s == 2


def test_import_pairwise_overlaps():
    rows = [["en0", "es0", None], ["en1", None, "de1"], ["en2", "es2", None], ["en3", None, "de3"]]
    corpus, _ = import_corpus(DOCS, (["en", "es", "de"], rows))
    idx = alignment_index(corpus)
    assert idx.pair(0, 1).tolist() == [0, 2]
    assert idx.pair(0, 2).tolist() == [1, 3]
    assert idx.pair(1, 2).size == 0


def test_import_errors():
    with pytest.raises(CorpusError, match="unknown"):
        import_corpus(DOCS, (["en", "es"], [["en0", "es9"]]))
    dup = dict(DOCS, en=DOCS["en"] + [DOCS["en"][0]])
    with pytest.raises(CorpusError, match="duplicate"):
        import_corpus(dup, (["en", "es"], [["en0", "es0"]]))


def test_import_hub_reorders_languages():
    rows = [[f"en{i}", f"es{i}"] for i in range(3)]
    corpus, _ = import_corpus(DOCS, (["en", "es"], rows), hub="es")
    assert corpus.langs == ["es", "en"]


def test_corpus_rejects_inconsistent_mask():
    import scipy.sparse as sp
    X = [sp.csc_matrix(np.array([[1.0, 0.0]])), sp.csc_matrix(np.array([[1.0, 1.0]]))]
    with pytest.raises(CorpusError):
        ComparableCorpus(["a", "b"], X, [[True, True], [True, True]])


def mask_corpus(mask):
    import scipy.sparse as sp
    mask = np.asarray(mask, bool)
    X = [sp.csc_matrix(mask[:, i][None, :].astype(float)) for i in range(mask.shape[1])]
    return ComparableCorpus([f"l{i}" for i in range(mask.shape[1])], X, mask)


def test_alignment_example_mask():
    idx = alignment_index(mask_corpus([[1, 1, 0], [1, 0, 1]]))
    assert idx.pair(0, 1).tolist() == [0]
    assert idx.pair(0, 2).tolist() == [1]
    assert idx.pair(1, 2).tolist() == []


def test_alignment_full_and_absent():
    idx = alignment_index(mask_corpus([[1, 1, 0]] * 4))
    assert idx.pair(0, 1).tolist() == [0, 1, 2, 3]
    assert idx.a_single[2].size == 0


masks = st.integers(2, 5).flatmap(lambda m: st.lists(
    st.lists(st.booleans(), min_size=m, max_size=m).filter(lambda r: sum(r) >= 2),
    min_size=1, max_size=12))


@given(masks)
def test_alignment_matches_scan(mask):
    idx = alignment_index(mask_corpus(mask))
    m = len(mask[0])
    for i, j in itertools.permutations(range(m), 2):
        expect = [c for c, row in enumerate(mask) if row[i] and row[j]]
        assert idx.pair(i, j).tolist() == expect
        assert idx.pair(i, j).size == idx.pair(j, i).size
        assert set(expect) == set(idx.a_single[i].tolist()) & set(idx.a_single[j].tolist())


def test_filter_stubs():
    docs = [Document("a", "en", tuple(f"w{i}" for i in range(19))),
            Document("b", "en", tuple(f"w{i}" for i in range(20)))]
    assert [d.id for d in filter_stubs(docs, 20)] == ["b"]
    assert filter_stubs(docs, 0) == docs


def test_split_fraction_zero_and_determinism(small_corpus):
    train, test = split_train_test(small_corpus, RandomFraction(0.0))
    assert train.s == small_corpus.s and len(test) == 0
    a = split_train_test(small_corpus, RandomFraction(0.5), seed=3)
    b = split_train_test(small_corpus, RandomFraction(0.5), seed=3)
    assert np.array_equal(a[1].columns, b[1].columns)
    assert (a[0].stacked() != b[0].stacked()).nnz == 0


def test_split_empty_pairs(small_corpus):
    train, test = split_train_test(small_corpus, EmptyPairs((("es", "de"),)))
    i, j = train.lang_index("es"), train.lang_index("de")
    assert alignment_index(train).pair(i, j).size == 0
    full = alignment_index(small_corpus).pair(i, j)
    assert np.array_equal(np.sort(test.columns)[np.isin(np.sort(test.columns), full)], full)
    assert test.matrices(1, 2)[0].shape[1] == full.size


def test_split_disjoint(small_corpus):
    train, test = split_train_test(small_corpus, ExplicitColumns(frozenset(range(0, 400, 3))))
    assert len(test) == len(range(0, 400, 3))
    assert train.s + len(test) <= small_corpus.s


def test_split_refuses_empty_train(small_corpus):
    with pytest.raises(CorpusError):
        split_train_test(small_corpus, RandomFraction(1.0))


def test_corpus_container_roundtrip(small_corpus, tmp_path):
    save_corpus(small_corpus, tmp_path / "c")
    back = load_corpus(tmp_path / "c")
    assert back.langs == small_corpus.langs
    assert np.array_equal(back.present, small_corpus.present)
    for a, b in zip(back.X, small_corpus.X):
        assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)
        assert np.array_equal(a.data, b.data)
    assert back.doc_ids == small_corpus.doc_ids
    header = (tmp_path / "c" / "X.en.txt").read_text().splitlines()[0].split()
    assert header[0] == "dims" and int(header[3]) == small_corpus.X[0].nnz
