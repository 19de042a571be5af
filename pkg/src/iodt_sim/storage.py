"""In-process content-addressed blob store with paid pinning.

Blobs are addressed by their SHA-256 digest. A blob stays retrievable while
its pin is paid up; payments accumulate on the record and are settled when
the pin lapses. Every accepted store anchors the digest on the ledger.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .ledger import Chain, TxKind, submit
from .topology import NodeId


class StorageError(Exception):
    pass


class InsufficientPayment(StorageError):
    pass


class ContentNotFound(StorageError, KeyError):
    pass


class PinExpired(StorageError):
    pass


class AccessDenied(StorageError, PermissionError):
    pass


class IntegrityError(StorageError):
    pass


@dataclass
class ContentRecord:
    cid: bytes
    blob: bytes
    pinned_until: int
    incentive_balance: int = 0
    settled: bool = False


def cid_of(blob: bytes) -> bytes:
    return hashlib.sha256(blob).digest()


class ContentStore:
    """Blob store bound to a ledger.

    Args:
        chain: ledger receiving StoreHash and PinPayment transactions.
        pin_rate: gwei charged per pinned round.
        is_authorized: predicate deciding whether a requester may read; by
            default any node with an open session on ``chain``.
    """

    def __init__(
        self,
        chain: Chain,
        pin_rate: int = 10,
        is_authorized: Callable[[NodeId], bool] | None = None,
    ):
        if pin_rate <= 0:
            raise ValueError("pin_rate must be > 0")
        self.chain = chain
        self.pin_rate = pin_rate
        self.is_authorized = is_authorized or (lambda node_id: node_id in chain.sessions)
        self.records: dict[bytes, ContentRecord] = {}
        self.accepted_payments = 0
        self.settled_payments = 0
        self._expiry: list[tuple[int, bytes]] = []

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, cid: object) -> bool:
        return cid in self.records

    def store(self, blob: bytes, pin_rounds: int, payment: int, *, sender: NodeId, round_: int = 0) -> bytes:
        """Pin ``blob`` for ``pin_rounds`` rounds starting at ``round_``.

        A blob already held has its pin extended. Raises
        :class:`InsufficientPayment` (and touches neither store nor ledger)
        when ``payment < pin_rounds * pin_rate``.
        """
        if pin_rounds < 1:
            raise ValueError("pin_rounds must be >= 1")
        price = pin_rounds * self.pin_rate
        if payment < price:
            raise InsufficientPayment(f"pinning {pin_rounds} rounds costs {price} gwei, got {payment}")
        cid = cid_of(blob)
        store_tx = self.chain.make_tx(TxKind.STORE_HASH, {"cid": cid.hex()}, sender, round_)
        pay_tx = self.chain.make_tx(TxKind.PIN_PAYMENT, {"cid": cid.hex(), "amount": int(payment)}, sender, round_)
        # both submissions validate the sender before the store is touched
        submit(self.chain, store_tx)
        submit(self.chain, pay_tx)
        record = self.records.get(cid)
        until = round_ + pin_rounds - 1
        if record is None:
            record = self.records[cid] = ContentRecord(cid, bytes(blob), until)
        elif record.settled or record.pinned_until < round_:
            record.pinned_until = until
            record.settled = False
        else:
            record.pinned_until += pin_rounds
        record.incentive_balance += int(payment)
        self.accepted_payments += int(payment)
        heapq.heappush(self._expiry, (record.pinned_until, cid))
        return cid

    def retrieve(self, cid: bytes, requester: NodeId, round_: int) -> bytes:
        if not self.is_authorized(requester):
            raise AccessDenied(f"node {requester} is not authenticated")
        record = self.records.get(cid)
        if record is None:
            raise ContentNotFound(cid.hex())
        if round_ > record.pinned_until or record.settled:
            raise PinExpired(f"{cid.hex()} unpinned after round {record.pinned_until}")
        if cid_of(record.blob) != cid:
            raise IntegrityError(f"stored blob no longer hashes to {cid.hex()}")
        return record.blob

    def expire(self, round_: int) -> int:
        """Settle every pin that lapsed before ``round_``; returns how many."""
        count = 0
        while self._expiry and self._expiry[0][0] < round_:
            until, cid = heapq.heappop(self._expiry)
            record = self.records[cid]
            # stale heap entries: the pin was extended after this one was pushed
            if record.settled or record.pinned_until != until:
                continue
            record.settled = True
            self.settled_payments += record.incentive_balance
            record.incentive_balance = 0
            count += 1
        return count

    def live_balance(self) -> int:
        return sum(r.incentive_balance for r in self.records.values())

    def dump(self, directory: str | Path) -> list[Path]:
        """Write each blob to ``directory/<hex cid>``; returns the paths written."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for cid in sorted(self.records):
            path = out / cid.hex()
            path.write_bytes(self.records[cid].blob)
            paths.append(path)
        return paths
