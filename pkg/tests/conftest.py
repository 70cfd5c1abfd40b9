import numpy as np
import pytest

from jstrr import data_path
from jstrr.corpus import Document
from jstrr.priors import build_hyperparams

# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[1])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


def random_corpus(rng, D, V, max_words=8, max_ratings=2, min_words=1):
    docs = []
    for i in range(D):
        n = int(rng.integers(min_words, max_words + 1))
        m = int(rng.integers(0, max_ratings + 1))
        docs.append(Document(str(i), rng.integers(0, V, n).tolist(), rng.integers(1, 6, m).tolist()))
    return docs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def demo_reviews_path():
    return data_path("demo_reviews.jsonl")


@pytest.fixture
def small_hyper():
    return build_hyperparams(2, 2, 3, sigma=1.0)
