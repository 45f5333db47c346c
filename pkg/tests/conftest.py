import logging
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xlnews.corpus import import_corpus  # noqa: E402
from xlnews.synth import generate_comparable_corpus  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("xlnews").setLevel(logging.ERROR)
    yield


@pytest.fixture(scope="session")
def small_corpus():
    """Three languages, 400 documents, 6 topics."""
    sc = generate_comparable_corpus(n_docs=400, n_topics=6, vocab_size=200, doc_len=60,
                                    full_fraction=0.3, seed=11)
    corpus, _ = import_corpus(sc.docs, (sc.langs, sc.rows))
    return corpus


@pytest.fixture(scope="session")
def data_dir():
    return DATA
