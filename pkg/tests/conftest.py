import pytest

from tokenlab import (Alphabet, Corpus, make_modk, make_sentence,
                      random_tabular, train_ngram)


@pytest.fixture(scope="session")
def ab4():
    return Alphabet(symbols=("PAD", "EOS", "a", "b"), eos_id=1, pad_id=0)


@pytest.fixture(scope="session")
def ab5():
    return Alphabet(symbols=("PAD", "EOS", "x", "y", "z"), eos_id=1, pad_id=0)


def _sent(ab, syms):
    return make_sentence(ab.encode(syms), ab)


@pytest.fixture(scope="session")
def toy_corpus(ab4):
    sents = ([_sent(ab4, ["a", "b", "EOS"])] * 10
             + [_sent(ab4, ["b", "a", "EOS"])] * 8
             + [_sent(ab4, ["a", "b", "a", "EOS"])] * 7
             + [_sent(ab4, ["b", "a", "b", "EOS"])] * 5)
    return Corpus(tuple(sents), ab4, name="toy")


@pytest.fixture(scope="session")
def toy_ngram(toy_corpus):
    return train_ngram(toy_corpus, n=3, C=4, alpha=0.0)


@pytest.fixture(scope="session")
def tab_model(ab4):
    return random_tabular(ab4, C=4, seed=42)


@pytest.fixture(scope="session")
def modk_ref(ab5):
    return make_modk(ab5, C=6, ell=4, weights=(1, 1, 1, 1, 1, 2))


@pytest.fixture(scope="session")
def modk_ones(ab5):
    return make_modk(ab5, C=6, ell=4, weights=(1, 1, 1, 1, 1, 1))


@pytest.fixture(scope="session")
def modk_gap(ab5):
    return make_modk(ab5, C=6, ell=4, weights=(1, 1, 0, 1, 0, 1))
