import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from prescreen.fixtures import chain_and_cycles_graph, interlocking_cycles_graph
from prescreen.graph import enumerate_structures
from prescreen.uncertainty import make_simple

# edge ids in the interlocking-cycles fixture that the regressions poke at:
# 0 = the edge into the 2-cycle, 2 = the entry to the middle cycle,
# 5 = the bridge into the right cycle
BRIDGE_2CYCLE = 0
BRIDGE_MIDDLE = 2
BRIDGE_RIGHT = 5


@pytest.fixture(scope="session")
def bridge_graph():
    return interlocking_cycles_graph()


@pytest.fixture(scope="session")
def bridge_structures(bridge_graph):
    return enumerate_structures(bridge_graph, 3, 3)


@pytest.fixture(scope="session")
def bridge_simple(bridge_graph):
    return make_simple(bridge_graph)


@pytest.fixture(scope="session")
def chain_graph():
    return chain_and_cycles_graph()


@pytest.fixture(scope="session")
def chain_structures(chain_graph):
    return enumerate_structures(chain_graph, 3, 3)
