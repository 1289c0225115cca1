import itertools
import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    # frozen-set cache shared across the session, never the user's home
    cache = tmp_path_factory.getbasetemp() / "frozen-cache"
    monkeypatch.setenv("POLAROFDM_CACHE", str(cache))


def kron_matrix(m):
    """Explicit F^{(x)m} over GF(2)."""
    f = np.array([[1, 0], [1, 1]], dtype=np.int64)
    g = np.array([[1]], dtype=np.int64)
    for _ in range(m):
        g = np.kron(g, f)
    return g


def all_words(k):
    return np.array(list(itertools.product([0, 1], repeat=k)), dtype=np.uint8)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
