import sys
from pathlib import Path

import pytest

from qalloc.graph import DynamicGraphSequence, complete_graph
from qalloc.problem import ProblemInstance

TESTS = Path(__file__).parent
ROOT = TESTS.parent
sys.path.insert(0, str(TESTS))


def static_sequence(nominal, rounds, window=1):
    return DynamicGraphSequence(nominal, window, [nominal.edges] * rounds)


@pytest.fixture
def configs_dir():
    return ROOT / "configs"


@pytest.fixture
def three_node_instance():
    return ProblemInstance(loads=[6, 0, 6], stored=[0, 0, 0], capacities=[10, 20, 30])


@pytest.fixture
def complete3():
    return complete_graph(3)
