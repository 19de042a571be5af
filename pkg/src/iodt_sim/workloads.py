"""Synthetic ledger workloads behind the transaction-cost curves.

These drive the ledger directly, without the radio simulation, so that cost
comparisons see exactly the same transactions under each consensus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .authn import authenticate, register
from .config import Consensus, CostModel
from .ledger import Chain, Credentials, TxKind, seal, submit, sha256

VALIDATORS = (0, 1)


@dataclass(frozen=True)
class WorkloadCost:
    transactions: int
    blocks: int
    cost_gwei: int
    attempts: tuple[int, ...] = ()

    @property
    def mean_attempts(self) -> float:
        return float(np.mean(self.attempts)) if self.attempts else 0.0


def _chain(participants: int, cost: CostModel) -> Chain:
    ids = set(VALIDATORS) | set(range(len(VALIDATORS), len(VALIDATORS) + participants))
    return Chain(list(VALIDATORS), ids, cost)


def _attempts(chain: Chain) -> tuple[int, ...]:
    return tuple(b.work.attempts for b in chain.blocks if b.work is not None)


def registration_cost(
    packets: int,
    consensus: Consensus = Consensus.POA,
    cost: CostModel | None = None,
    seed: int = 0,
) -> WorkloadCost:
    """Cumulative cost of ``packets`` nodes registering and then authenticating.

    Each node sends one Register and one Authenticate packet; registrations
    and authentications are sealed in two separate blocks.
    """
    if packets < 0:
        raise ValueError("packets must be >= 0")
    cost = cost or CostModel()
    rng = np.random.default_rng([seed, packets])
    chain = _chain(packets, cost)
    node_ids = range(len(VALIDATORS), len(VALIDATORS) + packets)
    macs = rng.choice(1 << 47, size=packets, replace=False) if packets else []
    for nid, mac in zip(node_ids, macs):
        register(chain, Credentials(nid, int(mac), 0), 0)
    seal(chain, 0, consensus, rng)
    for nid, mac in zip(node_ids, macs):
        authenticate(chain, Credentials(nid, int(mac), 0), round_=1)
    seal(chain, 1, consensus, rng)
    return WorkloadCost(2 * packets, len(chain.blocks), chain.cumulative_gwei, _attempts(chain))


def registration_cost_curve(
    packet_counts: list[int],
    consensus: Consensus = Consensus.POA,
    cost: CostModel | None = None,
    seed: int = 0,
) -> list[tuple[int, int]]:
    return [(n, registration_cost(n, consensus, cost, seed).cost_gwei) for n in packet_counts]


def storage_workload(
    transactions: int,
    consensus: Consensus,
    block_size: int = 10,
    cost: CostModel | None = None,
    seed: int = 0,
) -> WorkloadCost:
    """Seal ``transactions`` alternating StoreHash / ProvisionService transactions.

    The transaction stream depends only on ``seed`` and ``transactions``, so
    PoA and PoW see identical workloads; only the sealing differs.
    """
    if transactions < 0 or block_size < 1:
        raise ValueError("transactions must be >= 0 and block_size >= 1")
    cost = cost or CostModel()
    chain = _chain(1, cost)
    node = len(VALIDATORS)
    pow_rng = np.random.default_rng([seed, 1])
    round_ = 0
    for i in range(transactions):
        cid = sha256(f"workload:{seed}:{i}".encode()).hex()
        sender = VALIDATORS[i % len(VALIDATORS)]
        if i % 2 == 0:
            tx = chain.make_tx(TxKind.STORE_HASH, {"cid": cid}, sender, round_)
        else:
            payload = {"service_id": i, "cid": cid, "hash": sha256(bytes.fromhex(cid)).hex(), "requester": node}
            tx = chain.make_tx(TxKind.PROVISION_SERVICE, payload, sender, round_)
        submit(chain, tx)
        if len(chain.pending) >= block_size:
            seal(chain, round_, consensus, pow_rng)
            round_ += 1
    seal(chain, round_, consensus, pow_rng)
    return WorkloadCost(transactions, len(chain.blocks), chain.cumulative_gwei, _attempts(chain))
