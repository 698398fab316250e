from __future__ import annotations

from pathlib import Path

import pytest

from flipda.backends import KeywordClassifierBackend, StubInfillBackend, load_classifier_weights, load_fill_lexicon
from flipda.corpus import load_dataset
from flipda.lexops import LexiconIndex
from flipda.tasks import get_task

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def lexicon() -> LexiconIndex:
    return LexiconIndex.load(
        synonyms_path=str(DATA / "synonyms.tsv"),
        embeddings_path=str(DATA / "embeddings.txt"),
        stopwords_path=str(DATA / "stopwords.txt"),
    )


@pytest.fixture
def rte_task():
    return get_task("rte")


@pytest.fixture
def rte32(rte_task):
    return load_dataset(str(DATA / "rte32.jsonl"), rte_task)


@pytest.fixture
def stub_infill() -> StubInfillBackend:
    return StubInfillBackend(load_fill_lexicon(str(DATA / "fill_lexicon.txt")))


@pytest.fixture
def keyword_classifier() -> KeywordClassifierBackend:
    return KeywordClassifierBackend(load_classifier_weights(str(DATA / "classifier_weights.tsv")))
