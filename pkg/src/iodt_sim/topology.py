"""Network placement, node roles and geometric queries."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, SimConfig

NodeId = int


class Role(str, enum.Enum):
    DRONE = "drone"
    CLUSTER_HEAD = "cluster_head"
    BASE_STATION = "base_station"


class Status(str, enum.Enum):
    ALIVE = "alive"
    DEAD = "dead"
    EVICTED = "evicted"


class UnknownNodeError(LookupError):
    pass


@dataclass
class Node:
    """One drone, cluster head or base station.

    ``mac`` is a 48-bit integer. ``malicious`` marks nodes injected by an
    attack scenario; they are excluded from the legitimate-drone metrics.
    Base stations are mains powered and are never drained.
    """

    id: NodeId
    mac: int
    role: Role
    x: float
    y: float
    residual_energy: float
    status: Status = Status.ALIVE
    reputation: int = 0
    authenticated: bool = False
    malicious: bool = False

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def is_bs(self) -> bool:
        return self.role is Role.BASE_STATION

    @property
    def active(self) -> bool:
        """Alive and not evicted; the only state that may take part in a protocol step."""
        return self.status is Status.ALIVE

    def mac_str(self) -> str:
        return ":".join(f"{(self.mac >> s) & 0xFF:02x}" for s in range(40, -8, -8))


@dataclass
class Network:
    nodes: dict[NodeId, Node]
    field_side: float
    comm_radius: float
    bs_ids: list[NodeId] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.bs_ids:
            raise ConfigError("a network needs at least one base station")
        for bs in self.bs_ids:
            if self.nodes[bs].role is not Role.BASE_STATION:
                raise ConfigError(f"node {bs} is listed as a base station but is not one")

    def __getitem__(self, node_id: NodeId) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"no node with id {node_id}") from None

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes.values())

    def sensors(self) -> list[Node]:
        """Every non-base-station node, legitimate or not."""
        return [n for n in self.nodes.values() if not n.is_bs]

    def drones(self) -> list[Node]:
        """Legitimate sensing nodes (drones and cluster heads)."""
        return [n for n in self.nodes.values() if not n.is_bs and not n.malicious]

    def alive_drones(self) -> list[Node]:
        return [n for n in self.drones() if n.active]

    def base_stations(self) -> list[Node]:
        return [self.nodes[i] for i in self.bs_ids]

    def next_id(self) -> NodeId:
        return max(self.nodes) + 1

    def add_node(self, node: Node) -> None:
        if node.id in self.nodes:
            raise ValueError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node

    def copy(self) -> "Network":
        nodes = {i: Node(**vars(n)) for i, n in self.nodes.items()}
        return Network(nodes, self.field_side, self.comm_radius, list(self.bs_ids))


def default_bs_positions(count: int, field_side: float) -> list[tuple[float, float]]:
    """Evenly spaced points on the horizontal midline of the field."""
    return [(field_side * (i + 1) / (count + 1), field_side / 2.0) for i in range(count)]


def _unique_macs(rng: np.random.Generator, count: int) -> list[int]:
    macs: list[int] = []
    seen: set[int] = set()
    while len(macs) < count:
        # locally administered unicast prefix keeps generated MACs out of vendor space
        mac = (int(rng.integers(0, 1 << 40)) | (0x02 << 40)) & ~(0x01 << 40)
        if mac not in seen:
            seen.add(mac)
            macs.append(mac)
    return macs


def deploy(config: SimConfig, rng_seed: int) -> Network:
    """Place drones uniformly at random and base stations deterministically.

    Node ids are assigned in order: drones, then the ``ch_slots`` dedicated
    cluster-head nodes, then base stations. Cluster-head nodes are ordinary
    sensing nodes that merely start in the head role; elections reassign it.
    """
    if config.drones < 1 or config.bs_count < 1 or config.ch_slots < 0:
        raise ConfigError("node counts must be >= 1 (drones, base stations)")
    if not config.field_side > 0:
        raise ConfigError("field_side must be > 0")
    rng = np.random.default_rng(rng_seed)
    n_sensors = config.drones + config.ch_slots
    xy = rng.uniform(0.0, config.field_side, size=(n_sensors, 2))
    macs = _unique_macs(rng, n_sensors + config.bs_count)
    nodes: dict[NodeId, Node] = {}
    for i in range(n_sensors):
        role = Role.DRONE if i < config.drones else Role.CLUSTER_HEAD
        nodes[i] = Node(i, macs[i], role, float(xy[i, 0]), float(xy[i, 1]), config.e0)
    positions = config.bs_positions or default_bs_positions(config.bs_count, config.field_side)
    bs_ids = []
    for j, (x, y) in enumerate(positions):
        nid = n_sensors + j
        nodes[nid] = Node(nid, macs[nid], Role.BASE_STATION, float(x), float(y), config.e0)
        bs_ids.append(nid)
    return Network(nodes, config.field_side, config.comm_radius, bs_ids)


def distance(a: Node, b: Node) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def degree(net: Network, node_id: NodeId) -> int:
    """Number of other active network members within ``comm_radius`` of ``node_id``.

    Injected attacker nodes are outsiders and never count as neighbours.
    """
    me = net[node_id]
    r = net.comm_radius
    return sum(
        1
        for other in net.nodes.values()
        if other.id != node_id and _counts_as_neighbour(other) and distance(me, other) <= r
    )


def _counts_as_neighbour(node: Node) -> bool:
    return node.active and not node.malicious


def degrees(net: Network, ids: list[NodeId]) -> np.ndarray:
    """Vectorised :func:`degree` for many nodes at once."""
    active = [n for n in net.nodes.values() if _counts_as_neighbour(n)]
    if not ids:
        return np.zeros(0, dtype=int)
    pts = np.array([(n.x, n.y) for n in active]) if active else np.zeros((0, 2))
    act_ids = np.array([n.id for n in active], dtype=np.int64)
    query = np.array([net[i].position for i in ids])
    d = np.hypot(query[:, None, 0] - pts[None, :, 0], query[:, None, 1] - pts[None, :, 1])
    within = d <= net.comm_radius
    within &= act_ids[None, :] != np.asarray(ids, dtype=np.int64)[:, None]
    return within.sum(axis=1)


def distance_to_nearest_bs(net: Network, node_id: NodeId) -> float:
    node = net[node_id]
    if not net.bs_ids:
        raise ConfigError("network has no base station")
    return min(distance(node, net.nodes[b]) for b in net.bs_ids)


def nearest_bs(net: Network, node_id: NodeId) -> NodeId:
    node = net[node_id]
    return min(net.bs_ids, key=lambda b: (distance(node, net.nodes[b]), b))
