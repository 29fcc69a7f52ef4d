import numpy as np
import pytest

from dampen.core import SelectionProblem
from dampen.fixtures import example_graph
from dampen.graphs import ebc_problem, edge_flip_enumerator
from dampen.sensitivity import BruteForceExplorer


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bridge_graph():
    """Two well-connected nodes over six loosely tied leaves; EBC(a) = 6.5."""
    return example_graph()


@pytest.fixture(scope="session")
def bridge_problem(bridge_graph):
    # 7.5 is the one-flip worst case of the matching shared-neighbor gadget,
    # used as the public sensitivity for this graph family.
    return ebc_problem(bridge_graph, global_sensitivity=7.5)


@pytest.fixture(scope="session")
def bridge_explorer(bridge_problem):
    """Session-wide brute-force ball around the bridge graph (reused by the
    worked-example tests and the deeper sensitivity probes)."""
    return BruteForceExplorer(
        bridge_problem, edge_flip_enumerator(), node_budget=500_000
    )


def make_abstract_problem(utilities, gs, n=4):
    """Selection problem over an explicit utility table."""
    table = tuple(float(u) for u in utilities)
    return SelectionProblem(
        database=table,
        candidates=tuple(range(len(table))),
        utility=lambda db, r: db[r],
        global_sensitivity=gs,
        database_size=n,
    )
