import numpy as np
import pytest

from grnorder import autodiff as ad
from grnorder.data import Paragraph, Sentence, Token, Vocabulary, generate_synthetic
from grnorder.model import ModelConfig, SentenceOrderingModel

ACCEPTANCE_LINES: list[str] = []


def noun(word, role="X"):
    return Token(word, True, role)


def words(*items):
    """Sentence from plain strings and (word, role) pairs for nouns."""
    return Sentence(tuple(noun(*w) if isinstance(w, tuple) else Token(w) for w in items))


@pytest.fixture(autouse=True)
def _float64():
    with ad.precision("float64"):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def match_day():
    """Four-sentence paragraph with a dad -> game -> crowd entity chain."""
    return Paragraph(
        "match-day",
        (
            words("my", ("dad", "S"), "woke", "up", "in", "the", ("morning", "X")),
            words(("dad", "S"), "took", "me", "to", "the", ("game", "O")),
            words("the", ("game", "S"), "drew", "a", "huge", ("crowd", "O")),
            words("the", ("crowd", "S"), "cheered", "loudly"),
        ),
    )


@pytest.fixture(scope="session")
def corpus():
    return generate_synthetic(7, 24, split_fractions=(0.5, 0.5, 0.0))


def tiny_model(paragraphs, variant="SE", steps=2, seed=0, **overrides):
    cfg = dict(variant=variant, steps=steps, embedding_dim=6, sentence_dim=8, entity_dim=6, edge_dim=3, dropout=0.0, seed=seed)
    cfg.update(overrides)
    return SentenceOrderingModel(ModelConfig(**cfg), Vocabulary.build(paragraphs))


@pytest.fixture
def make_model():
    return tiny_model


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
