import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlnews.textvec import (Document, SlidingIdfState, SparseVector, Vocabulary, build_vocabulary,
                            cosine, read_documents, sliding_idf_ingest, tokenize, vectorize,
                            write_documents)

DAY = 86400


def doc(i, tokens, lang="en", ts=None):
    return Document(f"d{i}", lang, tuple(tokens), ts)


# --- documents -----------------------------------------------------------------

def test_document_validation():
    with pytest.raises(ValueError):
        Document("", "en", ())
    with pytest.raises(ValueError):
        Document("x", "", ())
    assert Document("x", "en", []).tokens == ()


def test_document_jsonl_roundtrip(tmp_path):
    docs = [doc(0, ["a", "b"], ts=5), doc(1, [])]
    write_documents(docs, tmp_path / "d.jsonl")
    assert list(read_documents(tmp_path / "d.jsonl")) == docs


def test_tokenize_lowercases_and_splits():
    assert tokenize("Hello, World! x2-y") == ["hello", "world", "x2", "y"]


# --- vocabulary ------------------------------------------------------------------

def test_vocab_single_doc_no_filtering():
    v = build_vocabulary([doc(0, ["b", "a"])])
    assert v.term_to_index == {"a": 0, "b": 1}
    assert v.df.tolist() == [1, 1]
    assert v.n_docs == 1


def test_vocab_three_doc_example_as_written_removes_everything():
    # a: df 3, b: df 1, c: df 1.  min_df=2 keeps only a, and dropping the top-1
    # term removes a as well, so the example's stated result {b} cannot hold.
    v = build_vocabulary([doc(0, "ab"), doc(1, "ac"), doc(2, "a")], min_df=2, top_k_drop=1)
    assert len(v) == 0


def test_vocab_frequency_filters_compose():
    # with b given df 2 the filters leave exactly {b}
    v = build_vocabulary([doc(0, "ab"), doc(1, "ab"), doc(2, "ac"), doc(3, "a")],
                         min_df=2, top_k_drop=1)
    assert v.term_to_index == {"b": 0}
    assert v.df.tolist() == [2]


def test_vocab_top_drop_ties_go_lexicographic():
    v = build_vocabulary([doc(0, "xyz"), doc(1, "xyz")], top_k_drop=2)
    assert v.terms == ["z"]


def test_vocab_rejects_mixed_languages():
    with pytest.raises(ValueError, match="d1"):
        build_vocabulary([doc(0, "a"), doc(1, "a", lang="es")])


def test_vocab_file_roundtrip(tmp_path):
    v = build_vocabulary([doc(0, "abc"), doc(1, "bd")])
    v.save(tmp_path / "v.tsv")
    assert (tmp_path / "v.tsv").read_text().startswith("#n_docs=2\n")
    w = Vocabulary.load(tmp_path / "v.tsv", "en")
    assert w.term_to_index == v.term_to_index and w.df.tolist() == v.df.tolist()
    assert w.n_docs == 2 and w.digest() == v.digest()


# --- vectorize ---------------------------------------------------------------------

def test_vectorize_tf_times_log_idf():
    vocab = Vocabulary("en", {"t": 0, "u": 1}, np.array([1, 2]), 2)
    v = vectorize(doc(0, ["t", "t", "t", "u"]), vocab, normalize=False)
    assert v.indices.tolist() == [0]                 # u has DF = N and weight 0
    assert v.values[0] == pytest.approx(3 * math.log(2), abs=1e-12)
    assert v.values[0] == pytest.approx(2.0794, abs=1e-4)


def test_vectorize_empty_document_is_zero():
    vocab = Vocabulary("en", {"t": 0}, np.array([1]), 3)
    v = vectorize(doc(0, []), vocab)
    assert v.dim == 1 and v.nnz == 0 and v.norm() == 0


def test_vectorize_drops_unknown_terms():
    vocab = Vocabulary("en", {"t": 0}, np.array([1]), 3)
    assert vectorize(doc(0, ["zzz"]), vocab).nnz == 0


def test_vectorize_rejects_other_language():
    vocab = Vocabulary("en", {"t": 0}, np.array([1]), 3)
    with pytest.raises(ValueError):
        vectorize(doc(0, ["t"], lang="es"), vocab)


terms = st.lists(st.sampled_from("abcdefgh"), max_size=30)


@st.composite
def vocab_and_doc(draw):
    corpus = draw(st.lists(terms, min_size=1, max_size=8))
    docs = [doc(i, t) for i, t in enumerate(corpus)]
    return build_vocabulary(docs), doc(99, draw(terms))


@given(vocab_and_doc())
def test_duplicating_tokens_doubles_weights(vd):
    vocab, d = vd
    v1 = vectorize(d, vocab, normalize=False)
    v2 = vectorize(doc(99, d.tokens * 2), vocab, normalize=False)
    assert v2.indices.tolist() == v1.indices.tolist()
    assert np.array_equal(v2.values, 2 * v1.values)


@given(vocab_and_doc())
def test_normalized_vectors_have_unit_or_zero_norm(vd):
    vocab, d = vd
    n = vectorize(d, vocab).norm()
    assert n == 0 or abs(n - 1) <= 1e-9


@given(vocab_and_doc(), st.floats(1.5, 20))
def test_log_base_cancels_in_cosine(vd, base):
    vocab, d = vd
    other = doc(100, list("abcd") * 2)
    a, b = vectorize(d, vocab, normalize=False), vectorize(other, vocab, normalize=False)
    rescale = 1 / math.log(base)
    assert cosine(a.scaled(rescale), b.scaled(rescale)) == pytest.approx(cosine(a, b), abs=1e-12)


# --- sparse vectors and cosine ----------------------------------------------------------

def test_sparse_vector_invariants():
    with pytest.raises(ValueError):
        SparseVector(3, np.array([1, 1]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        SparseVector(2, np.array([2]), np.array([1.0]))
    v = SparseVector.from_pairs(5, [(3, 1.0), (1, 2.0), (4, 0.0)])
    assert v.indices.tolist() == [1, 3]


def test_cosine_examples():
    a = SparseVector.from_dense([1.0, 1.0])
    b = SparseVector.from_dense([1.0, 0.0])
    assert cosine(a, a) == pytest.approx(1.0)
    assert cosine(SparseVector.from_dense([0.0, 3.0]), b) == 0.0
    assert cosine(a, b) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert cosine(a, SparseVector.zeros(2)) == 0.0
    with pytest.raises(ValueError):
        cosine(a, SparseVector.zeros(3))


dense = st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4)


@given(dense, dense)
def test_cosine_symmetric_and_bounded(x, y):
    a, b = SparseVector.from_dense(x), SparseVector.from_dense(y)
    assert cosine(a, b) == cosine(b, a)
    assert abs(cosine(a, b)) <= 1 + 1e-12


# --- sliding IDF -------------------------------------------------------------------

def test_sliding_single_ingest():
    s = sliding_idf_ingest(SlidingIdfState("en"), doc(0, "aab", ts=0))
    assert dict(s.df) == {"a": 1, "b": 1}


def test_sliding_eviction_after_window():
    s = SlidingIdfState("en", 10)
    s.ingest(doc(0, "ab", ts=0))
    s.ingest(doc(1, "bc", ts=11 * DAY))
    assert dict(s.df) == {"b": 1, "c": 1} and s.n_docs == 1


def test_sliding_same_day_counts_documents():
    s = SlidingIdfState("en")
    s.ingest(doc(0, "t", ts=100)).ingest(doc(1, "tt", ts=200))
    assert s.df["t"] == 2


def test_sliding_boundary_is_strict():
    s = SlidingIdfState("en", 10)
    s.ingest(doc(0, "a", ts=0))
    s.ingest(doc(1, "b", ts=10 * DAY))
    assert s.df["a"] == 1
    s.ingest(doc(2, "b", ts=10 * DAY + 1))
    assert "a" not in s.df


def test_sliding_requires_timestamp():
    with pytest.raises(ValueError):
        SlidingIdfState("en").ingest(doc(0, "a"))


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(-3 * DAY, 6 * DAY), terms), min_size=1, max_size=40))
def test_sliding_df_matches_recount(steps):
    s = SlidingIdfState("en", 3)
    t = 0
    seen = []
    for i, (dt, toks) in enumerate(steps):
        t = max(0, t + dt)            # mostly increasing, with some late arrivals
        s.ingest(doc(i, toks, ts=t))
        seen.append((t, set(toks)))
        cutoff = s.newest - 3 * DAY
        retained = [ts for ts, _ in s.retained()]
        assert all(ts >= cutoff for ts in retained)
        recount = {}
        for ts, terms_ in s.retained():
            for term in terms_:
                recount[term] = recount.get(term, 0) + 1
        assert dict(s.df) == recount


def test_vectorize_with_window_idf():
    vocab = build_vocabulary([doc(0, "ab")])
    s = SlidingIdfState("en")
    for i, toks in enumerate(["a", "ab", "b", "b"]):
        s.ingest(doc(i, toks, ts=i))
    v = vectorize(doc(9, "aab"), vocab, s, normalize=False)
    assert v.values.tolist() == pytest.approx([2 * math.log(4 / 2), math.log(4 / 3)])
