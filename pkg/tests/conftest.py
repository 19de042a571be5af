import numpy as np
import pytest

from iodt_sim.config import SimConfig
from iodt_sim.ledger import Chain
from iodt_sim.topology import Network, Node, Role


def make_network(drones, bs=((0.0, 0.0),), energies=None, radius=150.0, side=1000.0, authenticated=True):
    """Network from explicit positions; drones get ids 0..n-1, base stations follow."""
    nodes = {}
    for i, (x, y) in enumerate(drones):
        e = 0.5 if energies is None else energies[i]
        nodes[i] = Node(i, 0x020000000000 + i, Role.DRONE, x, y, e, authenticated=authenticated)
    bs_ids = []
    for j, (x, y) in enumerate(bs):
        nid = len(drones) + j
        nodes[nid] = Node(nid, 0x020000000000 + nid, Role.BASE_STATION, x, y, 0.5)
        bs_ids.append(nid)
    return Network(nodes, side, radius, bs_ids)


def make_chain(net, cost=None):
    from iodt_sim.config import CostModel

    return Chain(list(net.bs_ids), set(net.nodes), cost or CostModel())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return SimConfig(drones=20, ch_slots=2, max_rounds=60, seed=5)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
