"""Write a small synthetic 3-language comparable corpus and bilingual event
streams as JSONL/TSV files, in the formats the command-line tools read."""
from __future__ import annotations

import argparse
from pathlib import Path

from xlnews.corpus import write_alignment
from xlnews.eventlink.pipeline import AnnotatedDocument, write_stream
from xlnews.synth import generate_comparable_corpus, generate_event_streams, make_topic_languages
from xlnews.textvec import write_documents


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--docs", type=int, default=600)
    ap.add_argument("--topics", type=int, default=8)
    ap.add_argument("--vocab-size", type=int, default=300)
    ap.add_argument("--doc-len", type=int, default=80)
    ap.add_argument("--events", type=int, default=30)
    ap.add_argument("--seed", type=int, default=7)
    a = ap.parse_args(argv)

    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    langs = ("en", "es", "de")
    languages = make_topic_languages(langs, a.topics, a.vocab_size, words_per_topic=30, seed=a.seed)
    sc = generate_comparable_corpus(a.docs, a.topics, a.vocab_size, langs, full_fraction=0.2,
                                    doc_len=a.doc_len, seed=a.seed, languages=languages)
    for lang in langs:
        write_documents(sc.docs[lang], out / f"docs.{lang}.jsonl")
    write_alignment(out / "alignment.tsv", sc.langs, sc.rows)

    st = generate_event_streams(languages[:2], n_events=a.events, articles_per_event=(3, 6),
                                days=10, doc_len=a.doc_len, n_concepts=400, n_locations=15,
                                seed=a.seed + 1)
    labels = []
    for lang in st.langs:
        write_stream(out / f"stream.{lang}.jsonl",
                     [AnnotatedDocument(x.doc, x.entities, x.keywords, x.location, x.dates)
                      for x in st.articles[lang]])
        labels += [(x.doc.id, x.event) for x in st.articles[lang]]
    with open(out / "stream_events.tsv", "w", encoding="utf-8") as fh:
        for doc_id, ev in sorted(labels):
            fh.write(f"{doc_id}\t{ev}\n")


if __name__ == "__main__":
    main()
