import os

import hypothesis
import numpy as np
import pytest

# Без файла логов в тестах
os.environ.setdefault('LOG_FILE', '')

from graph.digraph import (  # noqa: E402
    Digraph,
    balancing_fixture,
    bidirectional_ring,
    complete_digraph,
    cycle_digraph,
)

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale runs (T = 1e4..1e5 steps)")


def pytest_collection_modifyitems(config, items):
    # Прогоны масштаба публикации только по явному -m slow
    if config.getoption("-m"):
        return
    skip_slow = pytest.mark.skip(reason="запуск: pytest -m slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def cycle3() -> Digraph:
    return cycle_digraph(3)


@pytest.fixture
def complete4() -> Digraph:
    return complete_digraph(4)


@pytest.fixture
def fig1() -> Digraph:
    return balancing_fixture()


@pytest.fixture
def pair() -> Digraph:
    return bidirectional_ring(2)


@pytest.fixture
def path3() -> Digraph:
    return Digraph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def threads(monkeypatch):
    """Снимает ограничение REWB_THREADS для тестов параллельных прогонов"""
    from utils.config import Config
    monkeypatch.setattr(Config(), 'REWB_THREADS', 8)
