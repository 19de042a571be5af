"""Node registration, credential authentication, reputation and eviction."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

from .ledger import Chain, Credentials, Transaction, TxKind, submit
from .topology import Network, NodeId, Status

log = logging.getLogger(__name__)

__all__ = [
    "AuthDecision",
    "AuthOutcome",
    "Credentials",
    "ReputationPolicy",
    "authenticate",
    "credentials_of",
    "evict",
    "register",
    "update_reputation",
]


class AuthOutcome(str, enum.Enum):
    AUTHENTICATED = "authenticated"
    NOT_AUTHENTICATED = "not_authenticated"
    RECOMMEND_REGISTRATION = "recommend_registration"


@dataclass(frozen=True)
class AuthDecision:
    outcome: AuthOutcome
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome is AuthOutcome.AUTHENTICATED


@dataclass(frozen=True)
class ReputationPolicy:
    step: int = 1
    penalty: int = 2
    minimum: int = -10
    maximum: int = 10

    def clamp(self, value: int) -> int:
        return max(self.minimum, min(self.maximum, value))


class UnregisteredError(LookupError):
    pass


def credentials_of(net: Network, node_id: NodeId) -> Credentials:
    """The triple a legitimate node presents about itself."""
    node = net[node_id]
    return Credentials(node.id, node.mac, node.reputation)


def _to_payload(creds: Credentials) -> dict:
    return {"id": creds.id, "mac": creds.mac, "reputation": creds.reputation}


def register(chain: Chain, creds: Credentials, round_: int = 0) -> Transaction:
    """Submit a Register transaction for ``creds``.

    Duplicate ids are not refused here; the sealer drops them so the first
    registration on chain always wins.
    """
    tx = chain.make_tx(TxKind.REGISTER, _to_payload(creds), creds.id, round_)
    submit(chain, tx)
    return tx


def authenticate(
    chain: Chain,
    presented: Credentials,
    *,
    source: NodeId | None = None,
    round_: int | None = None,
) -> AuthDecision:
    """Compare ``presented`` against the sealed on-chain record.

    ``source`` is the physical node making the attempt (defaults to the
    claimed id). A successful attempt opens a session for it, and when
    ``round_`` is given an Authenticate transaction is also queued.
    """
    record = chain.credential_index.get(presented.id)
    if record is None:
        return AuthDecision(AuthOutcome.RECOMMEND_REGISTRATION, f"id {presented.id} has no on-chain record")
    mismatched = [
        name for name in ("mac", "reputation")
        if getattr(presented, name) != getattr(record, name)
    ]
    source = presented.id if source is None else source
    if mismatched or source in chain.revoked:
        reason = "revoked" if not mismatched else "mismatch on " + ", ".join(mismatched)
        return AuthDecision(AuthOutcome.NOT_AUTHENTICATED, reason)
    chain.sessions.add(source)
    if round_ is not None:
        submit(chain, chain.make_tx(TxKind.AUTHENTICATE, {"id": presented.id}, source, round_))
    return AuthDecision(AuthOutcome.AUTHENTICATED, "credentials match")


def _pending_reputation(chain: Chain, node_id: NodeId) -> int:
    rep = chain.credential_index[node_id].reputation
    for tx in chain.pending:
        if tx.kind is TxKind.REPUTATION_UPDATE and tx.payload["id"] == node_id:
            rep = tx.payload["reputation"]
    return rep


def update_reputation(
    chain: Chain,
    node_id: NodeId,
    honest: bool,
    policy: ReputationPolicy = ReputationPolicy(),
    round_: int = 0,
    sender: NodeId | None = None,
) -> int:
    """Reward or penalise ``node_id`` and queue the new value on chain.

    The change is computed from the latest value, counting updates still in
    the pending pool, so several reports within one round accumulate.
    The transaction is sent by ``sender`` (default: the first validator).
    """
    if node_id not in chain.credential_index:
        raise UnregisteredError(f"node {node_id} is not registered")
    current = _pending_reputation(chain, node_id)
    new = policy.clamp(current + policy.step if honest else current - policy.penalty)
    sender = chain.validators[0] if sender is None else sender
    submit(chain, chain.make_tx(TxKind.REPUTATION_UPDATE, {"id": node_id, "reputation": new}, sender, round_))
    return new


def evict(net: Network, node_id: NodeId, chain: Chain | None = None) -> bool:
    """Cut ``node_id`` off the network; returns False if it was already evicted."""
    node = net[node_id]
    if node.status is Status.EVICTED:
        return False
    node.status = Status.EVICTED
    node.authenticated = False
    if chain is not None:
        chain.revoked.add(node_id)
        chain.sessions.discard(node_id)
    log.info("evicted node %d", node_id)
    return True
