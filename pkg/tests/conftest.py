from pathlib import Path

import numpy as np
import pytest

from tagparse.conllu import Treebank, build_vocabulary, make_sentence
from tagparse.embeddings import EmbeddingTable
from tagparse.model import EncoderConfig, TrainConfig

FIXTURES = Path(__file__).parent / "fixtures"

TINY_SENTENCES = [
    (["the", "dog", "runs", "."], ["DET", "NOUN", "VERB", "PUNCT"],
     [2, 3, 0, 3], ["det", "nsubj", "root", "punct"]),
    (["a", "cat", "sleeps", "."], ["DET", "NOUN", "VERB", "PUNCT"],
     [2, 3, 0, 3], ["det", "nsubj", "root", "punct"]),
    (["the", "cat", "runs", "fast", "."], ["DET", "NOUN", "VERB", "ADV", "PUNCT"],
     [2, 3, 0, 3, 3], ["det", "nsubj", "root", "advmod", "punct"]),
    (["dogs", "sleep", "."], ["NOUN", "VERB", "PUNCT"],
     [2, 0, 2], ["nsubj", "root", "punct"]),
    (["she", "sees", "the", "dog", "."], ["PRON", "VERB", "DET", "NOUN", "PUNCT"],
     [2, 0, 4, 2, 2], ["nsubj", "root", "det", "obj", "punct"]),
]


def tiny_treebank(split: str) -> Treebank:
    sentences = [
        make_sentence(f, u, h, d, sent_id=f"{split}-{i}")
        for i, (f, u, h, d) in enumerate(TINY_SENTENCES)
    ]
    return Treebank(sentences, split=split, name="tiny")


@pytest.fixture(scope="session")
def tiny_train() -> Treebank:
    return tiny_treebank("train")


@pytest.fixture(scope="session")
def tiny_dev() -> Treebank:
    return tiny_treebank("dev")


@pytest.fixture(scope="session")
def tiny_vocab(tiny_train):
    return build_vocabulary(tiny_train)


@pytest.fixture(scope="session")
def tiny_table(tiny_vocab) -> EmbeddingTable:
    rng = np.random.default_rng(7)
    vectors = {form: rng.normal(size=16) for form in tiny_vocab.forms}
    return EmbeddingTable(dim=16, vectors=vectors,
                          unknown_vector=np.zeros(16))


@pytest.fixture(scope="session")
def small_encoder_config() -> EncoderConfig:
    return EncoderConfig(word_dim=16, char_dim=8, char_lstm_input=8, tag_dim=8,
                         lstm_layers=1, lstm_size=32, dropout=0.0)


@pytest.fixture(scope="session")
def small_train_config() -> TrainConfig:
    return TrainConfig(max_epochs=4, patience=2, seed=0)
