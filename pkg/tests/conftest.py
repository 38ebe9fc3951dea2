import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from opinion_landscape import potential as P
from opinion_landscape.signed_graph import SignedGraph

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PHI = (1 + 5**0.5) / 2


@pytest.fixture
def triangle():
    """Example-1 triangle: weights 1, 1 and -2 on the edge between vertices 2 and 3."""
    return SignedGraph.from_edges(3, [(0, 1, 1), (0, 2, 1), (1, 2, -2)])


@pytest.fixture
def k3():
    return SignedGraph.from_edges(3, [(0, 1, 1), (0, 2, 1), (1, 2, 1)])


@pytest.fixture
def pair_pos():
    return SignedGraph.from_edges(2, [(0, 1, 1)])


@pytest.fixture
def pair_neg():
    return SignedGraph.from_edges(2, [(0, 1, -1)])


@pytest.fixture(params=sorted(P.PRESETS))
def preset(request):
    return P.make_preset(request.param)


def all_presets():
    return [P.make_preset(name) for name in sorted(P.PRESETS)]


def random_graph(seed, n, low=-5, high=5, density=0.7):
    rng = np.random.default_rng(seed)
    from opinion_landscape.signed_graph import random_signed_graph
    return random_signed_graph(rng, n, low, high, density)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
