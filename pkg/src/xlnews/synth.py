"""Synthetic comparable corpora and bilingual news streams with planted
structure, used by the tests, the acceptance suite and the example scripts.

Every language has its own topic-word distributions over a disjoint
vocabulary, so the only thing languages share is the latent topic mixture of
a multilingual document or news event.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .textvec import Document


@dataclass
class TopicLanguage:
    lang: str
    topics: np.ndarray          # n_topics x vocab_size, rows sum to 1
    background: np.ndarray      # vocab_size, sums to 1
    background_weight: float

    @property
    def vocab_size(self) -> int:
        return self.topics.shape[1]

    def term(self, i: int) -> str:
        return f"{self.lang}{i:05d}"

    def sample(self, theta: np.ndarray, length: int, rng: np.random.Generator) -> list[str]:
        p = (1 - self.background_weight) * (theta @ self.topics) + self.background_weight * self.background
        counts = rng.multinomial(length, p / p.sum())
        (idx,) = np.nonzero(counts)
        tokens = [self.term(i) for i, c in zip(idx, counts[idx]) for _ in range(c)]
        rng.shuffle(tokens)
        return tokens


def make_topic_languages(langs, n_topics: int = 30, vocab_size: int = 2000,
                         words_per_topic: int = 60, background_weight: float = 0.15,
                         seed: int = 0) -> list[TopicLanguage]:
    rng = np.random.default_rng(seed)
    out = []
    ranks = np.arange(1, vocab_size + 1)
    for lang in langs:
        T = np.zeros((n_topics, vocab_size))
        for t in range(n_topics):
            words = rng.choice(vocab_size, size=words_per_topic, replace=False)
            T[t, words] = rng.dirichlet(np.full(words_per_topic, 0.5))
        bg = 1.0 / ranks
        bg = bg[rng.permutation(vocab_size)]
        out.append(TopicLanguage(lang, T, bg / bg.sum(), background_weight))
    return out


@dataclass
class SyntheticCorpus:
    langs: list[str]
    docs: dict[str, list[Document]]
    rows: list[list[str | None]]
    thetas: np.ndarray
    languages: list[TopicLanguage] = field(repr=False, default_factory=list)


def generate_comparable_corpus(n_docs: int = 5000, n_topics: int = 30, vocab_size: int = 2000,
                               langs=("en", "es", "de"), full_fraction: float = 0.1,
                               alpha: float = 0.1, doc_len: int = 150,
                               seed: int = 0, languages: list[TopicLanguage] | None = None
                               ) -> SyntheticCorpus:
    """Multilingual documents drawn from shared topic mixtures.

    Language 0 is the hub.  A ``full_fraction`` of the documents exists in
    every language; every other document exists in the hub and one randomly
    chosen further language.
    """
    rng = np.random.default_rng(seed)
    langs = list(langs)
    if languages is None:
        languages = make_topic_languages(langs, n_topics, vocab_size, seed=seed + 1)
    thetas = rng.dirichlet(np.full(n_topics, alpha), size=n_docs)
    docs: dict[str, list[Document]] = {l: [] for l in langs}
    rows = []
    for d in range(n_docs):
        if len(langs) == 2 or rng.random() < full_fraction:
            have = list(range(len(langs)))
        else:
            have = [0, int(rng.integers(1, len(langs)))]
        row: list[str | None] = [None] * len(langs)
        for i in have:
            length = max(20, int(rng.poisson(doc_len)))
            did = f"{langs[i]}-{d:06d}"
            docs[langs[i]].append(Document(did, langs[i], tuple(languages[i].sample(thetas[d], length, rng))))
            row[i] = did
        rows.append(row)
    return SyntheticCorpus(langs, docs, rows, thetas, languages)


# --- news streams --------------------------------------------------------------

@dataclass
class SyntheticArticle:
    doc: Document
    event: int
    entities: dict[str, float] = field(default_factory=dict)
    keywords: dict[str, float] = field(default_factory=dict)
    location: str | None = None
    dates: frozenset[str] = frozenset()


@dataclass
class SyntheticEvent:
    id: int
    theta: np.ndarray
    start: int
    entities: dict[str, float]
    keywords: dict[str, float]
    location: str
    dates: set[str]


@dataclass
class SyntheticStreams:
    langs: list[str]
    events: list[SyntheticEvent]
    articles: dict[str, list[SyntheticArticle]]


def _noisy_concepts(event_map: dict[str, float], keep: float, n_noise: int, pool: int,
                    prefix: str, rng: np.random.Generator) -> dict[str, float]:
    out = {k: w * float(rng.uniform(0.7, 1.3)) for k, w in event_map.items() if rng.random() < keep}
    for c in rng.choice(pool, size=n_noise, replace=False):
        out.setdefault(f"{prefix}{c}", float(rng.uniform(0.2, 0.8)))
    return out


def generate_event_streams(languages: list[TopicLanguage], n_events: int = 200,
                           articles_per_event: tuple[int, int] = (3, 8), days: int = 30,
                           alpha: float = 0.1, doc_len: int = 150, n_concepts: int = 3000,
                           n_locations: int = 40, seed: int = 0) -> SyntheticStreams:
    """News events reported in every language of ``languages``.

    Each event has a topic mixture, a start time, concept annotations, a
    location and a few mentioned dates.  Articles are drawn from the event's
    mixture within a day or so of its start and carry a noisy copy of the
    event's annotations: some concepts are missed, unrelated ones are added,
    the location is often absent, and locations follow a skewed distribution
    so unrelated events frequently share one.
    """
    rng = np.random.default_rng(seed)
    n_topics = languages[0].topics.shape[0]
    t0 = 1_400_000_000
    loc_p = 1.0 / np.arange(1, n_locations + 1)
    loc_p /= loc_p.sum()
    events = []
    for e in range(n_events):
        theta = rng.dirichlet(np.full(n_topics, alpha))
        ents = rng.choice(n_concepts, size=6, replace=False)
        kws = rng.choice(n_concepts, size=8, replace=False)
        start = t0 + int(rng.integers(days * 86400))
        base = date(2014, 5, 13) + timedelta(seconds=start - t0)
        dates = {(base + timedelta(days=int(o))).isoformat() for o in rng.integers(-3, 1, size=2)}
        events.append(SyntheticEvent(
            e, theta, start,
            {f"E{c}": float(w) for c, w in zip(ents, rng.uniform(0.5, 1.0, size=6))},
            {f"K{c}": float(w) for c, w in zip(kws, rng.uniform(0.5, 1.0, size=8))},
            f"L{int(rng.choice(n_locations, p=loc_p))}", dates))
    articles: dict[str, list[SyntheticArticle]] = {}
    for tl in languages:
        out = []
        for ev in events:
            for a in range(int(rng.integers(articles_per_event[0], articles_per_event[1] + 1))):
                ts = ev.start + int(rng.exponential(8 * 3600))
                length = max(20, int(rng.poisson(doc_len)))
                doc = Document(f"{tl.lang}-e{ev.id:04d}-a{a:02d}", tl.lang,
                               tuple(tl.sample(ev.theta, length, rng)), ts)
                if rng.random() < 0.5:
                    loc = ev.location if rng.random() < 0.8 else f"L{int(rng.choice(n_locations, p=loc_p))}"
                else:
                    loc = None
                dates = frozenset(d for d in sorted(ev.dates) if rng.random() < 0.4)
                out.append(SyntheticArticle(
                    doc, ev.id,
                    _noisy_concepts(ev.entities, 0.6, 2, n_concepts, "E", rng),
                    _noisy_concepts(ev.keywords, 0.5, 3, n_concepts, "K", rng),
                    loc, dates))
        out.sort(key=lambda x: (x.doc.timestamp, x.doc.id))
        articles[tl.lang] = out
    return SyntheticStreams([tl.lang for tl in languages], events, articles)
