"""First-order radio energy model.

    E_tx(k, d) = k*e_elec + k*eps_fs*d^2   for d <  d0
               = k*e_elec + k*eps_mp*d^4   for d >= d0
    E_rx(k)    = k*e_elec

with d0 = sqrt(eps_fs / eps_mp).
"""

from __future__ import annotations

from .config import EnergyParams
from .topology import Node, Status


def tx_cost(p: EnergyParams, bits: int, d: float) -> float:
    """Joules spent transmitting ``bits`` over ``d`` metres."""
    if bits < 0 or d < 0:
        raise ValueError(f"bits and distance must be >= 0, got {bits}, {d}")
    if d < p.d0:
        return bits * p.e_elec + bits * p.eps_fs * d * d
    return bits * p.e_elec + bits * p.eps_mp * d**4


def rx_cost(p: EnergyParams, bits: int) -> float:
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    return bits * p.e_elec


def aggregation_cost(p: EnergyParams, bits: int) -> float:
    return bits * p.e_da


def drain(node: Node, amount: float) -> float:
    """Remove ``amount`` joules from ``node`` in place, flooring at zero.

    Returns the energy actually removed, which is less than ``amount`` when
    the node runs dry. A node reaching 0 J becomes ``Dead``; an evicted node
    keeps its status.
    """
    if amount < 0:
        raise ValueError(f"drain amount must be >= 0, got {amount}")
    if amount == 0:
        return 0.0
    taken = min(amount, node.residual_energy)
    node.residual_energy -= taken
    if node.residual_energy <= 0.0:
        node.residual_energy = 0.0
        if node.status is Status.ALIVE:
            node.status = Status.DEAD
    return taken


def try_spend(node: Node, amount: float) -> tuple[bool, float]:
    """Spend ``amount`` joules on one radio operation.

    Returns ``(completed, joules_removed)``. If the node cannot pay in full the
    operation fails and the node is left dead.
    """
    completed = node.residual_energy >= amount
    return completed, drain(node, amount)
