"""Hash-linked, append-only ledger sealed by proof of authority or proof of work.

Block hashes cover ``index || prev_hash || tx_root || sealer`` (integers as
8-byte big-endian). ``tx_root`` is a SHA-256 Merkle root over the canonical
JSON encoding of the block's transactions, with 0x00/0x01 prefixes separating
leaf and interior hashes and the last node duplicated on odd levels.

Proof-of-work blocks have the same content and hash as their PoA twins; the
work receipt records the nonce search and is charged on top of gas.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .config import Consensus, CostModel
from .topology import NodeId

ZERO_HASH = bytes(32)
LOG_FORMAT = "iodt-chain/1"
_HEX64 = re.compile(r"^[0-9a-f]{64}$")


class TxKind(str, enum.Enum):
    REGISTER = "register"
    AUTHENTICATE = "authenticate"
    STORE_HASH = "store_hash"
    PROVISION_SERVICE = "provision_service"
    PIN_PAYMENT = "pin_payment"
    REPUTATION_UPDATE = "reputation_update"


class TransactionRejected(ValueError):
    pass


@dataclass(frozen=True)
class Credentials:
    """On-chain identity triple of a node: id, MAC and reputation snapshot."""

    id: NodeId
    mac: int
    reputation: int = 0


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    payload: Mapping[str, Any]
    sender: NodeId
    gas_used: int
    timestamp: int

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "payload": dict(self.payload),
            "sender": self.sender,
            "gas_used": self.gas_used,
            "timestamp": self.timestamp,
        }

    def encode(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class WorkReceipt:
    difficulty: int
    start_nonce: int
    nonce: int
    attempts: int


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    tx_root: bytes
    sealer: NodeId
    txs: tuple[Transaction, ...]
    hash: bytes
    round: int
    cost_gwei: int
    cumulative_gwei: int
    work: WorkReceipt | None = None


@dataclass(frozen=True)
class Drop:
    round: int
    tx: Transaction
    reason: str


@dataclass
class ChainReport:
    valid: bool
    first_bad_block: int | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.valid


# --- hashing -------------------------------------------------------------


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def merkle_root(txs: Iterable[Transaction]) -> bytes:
    level = [sha256(b"\x00" + tx.encode()) for tx in txs]
    if not level:
        return sha256(b"")
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha256(b"\x01" + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def header_bytes(index: int, prev_hash: bytes, tx_root: bytes, sealer: NodeId) -> bytes:
    return index.to_bytes(8, "big") + prev_hash + tx_root + sealer.to_bytes(8, "big")


def block_hash(index: int, prev_hash: bytes, tx_root: bytes, sealer: NodeId) -> bytes:
    return sha256(header_bytes(index, prev_hash, tx_root, sealer))


def leading_zero_bits_ok(digest: bytes, difficulty: int) -> bool:
    if difficulty == 0:
        return True
    return int.from_bytes(digest[:4], "big") >> (32 - difficulty) == 0


def search_nonce(header: bytes, difficulty: int, start_nonce: int) -> tuple[int, int]:
    """Try nonces from ``start_nonce`` upward; return ``(nonce, attempts)``."""
    base = hashlib.sha256(header)
    nonce = start_nonce
    attempts = 0
    while True:
        attempts += 1
        h = base.copy()
        h.update(nonce.to_bytes(8, "big"))
        if leading_zero_bits_ok(h.digest(), difficulty):
            return nonce, attempts
        nonce = (nonce + 1) & 0xFFFFFFFFFFFFFFFF


# --- payload schemas -----------------------------------------------------


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_hex64(v: Any) -> bool:
    return isinstance(v, str) and bool(_HEX64.match(v))


_SCHEMAS: dict[TxKind, dict[str, Any]] = {
    TxKind.REGISTER: {"id": _is_int, "mac": _is_int, "reputation": _is_int},
    TxKind.AUTHENTICATE: {"id": _is_int},
    TxKind.STORE_HASH: {"cid": _is_hex64},
    TxKind.PROVISION_SERVICE: {"service_id": _is_int, "cid": _is_hex64, "hash": _is_hex64, "requester": _is_int},
    TxKind.PIN_PAYMENT: {"cid": _is_hex64, "amount": _is_int},
    TxKind.REPUTATION_UPDATE: {"id": _is_int, "reputation": _is_int},
}


def payload_problem(kind: TxKind, payload: Mapping[str, Any]) -> str | None:
    schema = _SCHEMAS[kind]
    if set(payload) != set(schema):
        return f"{kind.value} payload needs exactly {sorted(schema)}, got {sorted(payload)}"
    for key, check in schema.items():
        if not check(payload[key]):
            return f"{kind.value} payload field {key!r} has bad value {payload[key]!r}"
    return None


# --- chain ---------------------------------------------------------------


@dataclass
class Chain:
    """The ledger plus the base-station-side state that goes with it.

    ``participants`` are the node ids allowed to send transactions,
    ``revoked`` the evicted ones, and ``sessions`` the ids currently holding
    an authenticated session (kept off chain). ``anchors`` indexes sealed
    ProvisionService hashes by service id.
    """

    validators: list[NodeId]
    participants: set[NodeId]
    cost: CostModel = field(default_factory=CostModel)
    blocks: list[Block] = field(default_factory=list)
    pending: list[Transaction] = field(default_factory=list)
    credential_index: dict[NodeId, Credentials] = field(default_factory=dict)
    drops: list[Drop] = field(default_factory=list)
    revoked: set[NodeId] = field(default_factory=set)
    sessions: set[NodeId] = field(default_factory=set)
    anchors: dict[int, bytes] = field(default_factory=dict)
    total_attempts: int = 0
    service_counter: int = 0

    def __post_init__(self) -> None:
        if not self.validators:
            raise ValueError("a chain needs at least one validator")
        self.participants = set(self.participants) | set(self.validators)

    @property
    def cumulative_gwei(self) -> int:
        return self.blocks[-1].cumulative_gwei if self.blocks else 0

    @property
    def head_hash(self) -> bytes:
        return self.blocks[-1].hash if self.blocks else ZERO_HASH

    def make_tx(self, kind: TxKind, payload: Mapping[str, Any], sender: NodeId, round_: int) -> Transaction:
        return Transaction(TxKind(kind), dict(payload), sender, self.cost.gas_schedule[TxKind(kind).value], round_)

    def transactions(self, kind: TxKind | None = None) -> Iterable[Transaction]:
        for block in self.blocks:
            for tx in block.txs:
                if kind is None or tx.kind is kind:
                    yield tx

    def sealer_for(self, round_: int) -> NodeId:
        return self.validators[round_ % len(self.validators)]


def submit(chain: Chain, tx: Transaction) -> int:
    """Queue ``tx`` for the next seal and return the pending-pool size."""
    if tx.sender not in chain.participants:
        raise TransactionRejected(f"unknown sender {tx.sender}")
    if not _is_int(tx.gas_used) or tx.gas_used <= 0:
        raise TransactionRejected("gas_used must be a positive integer")
    problem = payload_problem(tx.kind, tx.payload)
    if problem:
        raise TransactionRejected(problem)
    chain.pending.append(tx)
    return len(chain.pending)


def _screen(chain: Chain, round_: int) -> list[Transaction]:
    """Pop the pending pool, keeping valid transactions and recording drops."""
    registered = set(chain.credential_index)
    valid: list[Transaction] = []
    for tx in chain.pending:
        reason = None
        if tx.sender not in chain.participants:
            reason = "unknown sender"
        elif tx.sender in chain.revoked:
            reason = "sender evicted"
        elif tx.kind is TxKind.REGISTER:
            if tx.payload["id"] in registered:
                reason = "duplicate registration"
            else:
                registered.add(tx.payload["id"])
        elif tx.kind is TxKind.REPUTATION_UPDATE and tx.payload["id"] not in registered:
            reason = "reputation update for unregistered id"
        if reason:
            chain.drops.append(Drop(round_, tx, reason))
        else:
            valid.append(tx)
    chain.pending = []
    return valid


def _apply(index: dict[NodeId, Credentials], tx: Transaction) -> None:
    p = tx.payload
    if tx.kind is TxKind.REGISTER and p["id"] not in index:
        index[p["id"]] = Credentials(p["id"], p["mac"], p["reputation"])
    elif tx.kind is TxKind.REPUTATION_UPDATE and p["id"] in index:
        index[p["id"]] = replace(index[p["id"]], reputation=p["reputation"])


def rebuild_index(blocks: Iterable[Block]) -> dict[NodeId, Credentials]:
    """Fold every Register / ReputationUpdate transaction from genesis."""
    index: dict[NodeId, Credentials] = {}
    for block in blocks:
        for tx in block.txs:
            _apply(index, tx)
    return index


def _seal(chain: Chain, round_: int, consensus: Consensus, rng: np.random.Generator | None) -> Block | None:
    if not chain.pending:
        return None
    txs = tuple(_screen(chain, round_))
    if not txs:
        return None
    index = len(chain.blocks)
    prev = chain.head_hash
    sealer = chain.sealer_for(round_)
    root = merkle_root(txs)
    cost = sum(tx.gas_used for tx in txs) * chain.cost.gas_price
    work = None
    if consensus is Consensus.POW:
        if rng is None:
            raise ValueError("proof of work needs an rng for the starting nonce")
        start = int(rng.integers(0, 1 << 63, dtype=np.int64))
        header = header_bytes(index, prev, root, sealer)
        nonce, attempts = search_nonce(header, chain.cost.pow_difficulty, start)
        work = WorkReceipt(chain.cost.pow_difficulty, start, nonce, attempts)
        cost += attempts * chain.cost.pow_hash_cost
        chain.total_attempts += attempts
    block = Block(
        index=index,
        prev_hash=prev,
        tx_root=root,
        sealer=sealer,
        txs=txs,
        hash=block_hash(index, prev, root, sealer),
        round=round_,
        cost_gwei=cost,
        cumulative_gwei=chain.cumulative_gwei + cost,
        work=work,
    )
    chain.blocks.append(block)
    for tx in txs:
        _apply(chain.credential_index, tx)
        if tx.kind is TxKind.PROVISION_SERVICE:
            chain.anchors[tx.payload["service_id"]] = bytes.fromhex(tx.payload["hash"])
    return block


def seal_poa(chain: Chain, round_: int) -> Block | None:
    """Seal the pending pool with the round-robin validator for ``round_``.

    Returns ``None`` when there is nothing to seal, including the case where
    every pending transaction was dropped.
    """
    return _seal(chain, round_, Consensus.POA, None)


def seal_pow(chain: Chain, round_: int, rng: np.random.Generator) -> Block | None:
    return _seal(chain, round_, Consensus.POW, rng)


def seal(chain: Chain, round_: int, consensus: Consensus | str, rng: np.random.Generator | None = None) -> Block | None:
    return _seal(chain, round_, Consensus(consensus), rng)


def tx_cost_gwei(chain: Chain, tx: Transaction) -> int:
    return tx.gas_used * chain.cost.gas_price


# --- verification --------------------------------------------------------


def verify_blocks(
    blocks: list[Block],
    cost: CostModel,
    validators: list[NodeId] | None = None,
    consensus: Consensus | None = None,
) -> ChainReport:
    """Check links, roots, hashes, work and costs of ``blocks`` in order.

    The sealing schedule is only checked when ``validators`` is given, since
    exported logs do not carry rounds.
    """
    prev_hash = ZERO_HASH
    cumulative = 0
    last_round = -1
    for i, block in enumerate(blocks):
        def bad(reason: str) -> ChainReport:
            return ChainReport(False, i, reason)

        if block.index != i:
            return bad(f"index {block.index} at position {i}")
        if block.prev_hash != prev_hash:
            return bad("prev_hash does not link to previous block")
        if not block.txs:
            return bad("empty block")
        if merkle_root(block.txs) != block.tx_root:
            return bad("tx_root does not match transactions")
        if block_hash(block.index, block.prev_hash, block.tx_root, block.sealer) != block.hash:
            return bad("block hash mismatch")
        if validators is not None:
            if block.round <= last_round:
                return bad("rounds not strictly increasing")
            if block.sealer != validators[block.round % len(validators)]:
                return bad(f"sealer {block.sealer} is not the scheduled validator")
        if consensus is Consensus.POA and block.work is not None:
            return bad("work receipt on a proof-of-authority block")
        if consensus is Consensus.POW and block.work is None:
            return bad("missing work receipt on a proof-of-work block")
        expected_cost = sum(tx.gas_used for tx in block.txs) * cost.gas_price
        if block.work is not None:
            w = block.work
            if w.difficulty != cost.pow_difficulty:
                return bad("work difficulty differs from the chain's")
            header = header_bytes(block.index, block.prev_hash, block.tx_root, block.sealer)
            digest = sha256(header + w.nonce.to_bytes(8, "big"))
            if not leading_zero_bits_ok(digest, w.difficulty):
                return bad("proof of work does not meet its difficulty")
            if w.attempts != ((w.nonce - w.start_nonce) & 0xFFFFFFFFFFFFFFFF) + 1:
                return bad("work attempts inconsistent with nonce range")
            expected_cost += w.attempts * cost.pow_hash_cost
        if block.cost_gwei != expected_cost:
            return bad("block cost does not match gas and work")
        cumulative += block.cost_gwei
        if block.cumulative_gwei != cumulative:
            return bad("cumulative cost mismatch")
        prev_hash = block.hash
        last_round = block.round
    return ChainReport(True)


def verify_chain(chain: Chain) -> ChainReport:
    """Recompute every link, Merkle root, hash and cost; report the first fault."""
    report = verify_blocks(chain.blocks, chain.cost, chain.validators)
    if report and rebuild_index(chain.blocks) != chain.credential_index:
        return ChainReport(False, None, "credential index diverges from on-chain registrations")
    return report


# --- chain log -----------------------------------------------------------


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def block_record(block: Block) -> dict[str, Any]:
    return {
        "index": block.index,
        "prev_hash": block.prev_hash.hex(),
        "tx_root": block.tx_root.hex(),
        "sealer": block.sealer,
        "tx_count": len(block.txs),
        "cumulative_gwei": block.cumulative_gwei,
        "hash": block.hash.hex(),
        "cost_gwei": block.cost_gwei,
        "work": None if block.work is None else vars(block.work).copy(),
        "txs": [tx.to_json() for tx in block.txs],
    }


def _consensus_of(chain: Chain) -> Consensus:
    return Consensus.POW if any(b.work is not None for b in chain.blocks) else Consensus.POA


def export_chain(chain: Chain, path: str | Path, consensus: Consensus | None = None) -> None:
    """Write one JSON record per block, preceded by one header record.

    The header pins the pricing (and, for proof of work, the difficulty) so
    every byte of the file takes part in verification.
    """
    consensus = consensus or _consensus_of(chain)
    header: dict[str, Any] = {
        "format": LOG_FORMAT,
        "consensus": consensus.value,
        "gas_price": chain.cost.gas_price,
    }
    if consensus is Consensus.POW:
        header["pow_difficulty"] = chain.cost.pow_difficulty
        header["pow_hash_cost"] = chain.cost.pow_hash_cost
    lines = [_dumps(header)] + [_dumps(block_record(b)) for b in chain.blocks]
    Path(path).write_text("\n".join(lines) + "\n")


class ChainFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _strict_keys(obj: Any, keys: set[str], where: str) -> None:
    if not isinstance(obj, dict) or set(obj) != keys:
        raise ValueError(f"{where} must have exactly the keys {sorted(keys)}")


def _need_int(v: Any, name: str, minimum: int = 0) -> int:
    if not _is_int(v) or v < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}")
    return v


def _need_hex(v: Any, name: str) -> bytes:
    if not _is_hex64(v):
        raise ValueError(f"{name} must be 64 lowercase hex digits")
    return bytes.fromhex(v)


def _parse_tx(obj: Any) -> Transaction:
    _strict_keys(obj, {"kind", "payload", "sender", "gas_used", "timestamp"}, "transaction")
    kind = TxKind(obj["kind"])
    if not isinstance(obj["payload"], dict):
        raise ValueError("payload must be an object")
    problem = payload_problem(kind, obj["payload"])
    if problem:
        raise ValueError(problem)
    return Transaction(
        kind,
        obj["payload"],
        _need_int(obj["sender"], "sender"),
        _need_int(obj["gas_used"], "gas_used", 1),
        _need_int(obj["timestamp"], "timestamp"),
    )


_BLOCK_KEYS = {
    "index", "prev_hash", "tx_root", "sealer", "tx_count", "cumulative_gwei",
    "hash", "cost_gwei", "work", "txs",
}


def _parse_block(obj: Any) -> Block:
    _strict_keys(obj, _BLOCK_KEYS, "block record")
    if not isinstance(obj["txs"], list):
        raise ValueError("txs must be a list")
    txs = tuple(_parse_tx(t) for t in obj["txs"])
    if _need_int(obj["tx_count"], "tx_count") != len(txs):
        raise ValueError("tx_count does not match the transaction list")
    work = None
    if obj["work"] is not None:
        w = obj["work"]
        _strict_keys(w, {"difficulty", "start_nonce", "nonce", "attempts"}, "work")
        work = WorkReceipt(
            _need_int(w["difficulty"], "difficulty"),
            _need_int(w["start_nonce"], "start_nonce"),
            _need_int(w["nonce"], "nonce"),
            _need_int(w["attempts"], "attempts", 1),
        )
        if work.difficulty > 24:
            raise ValueError("difficulty above 24")
    return Block(
        index=_need_int(obj["index"], "index"),
        prev_hash=_need_hex(obj["prev_hash"], "prev_hash"),
        tx_root=_need_hex(obj["tx_root"], "tx_root"),
        sealer=_need_int(obj["sealer"], "sealer"),
        txs=txs,
        hash=_need_hex(obj["hash"], "hash"),
        round=-1,
        cost_gwei=_need_int(obj["cost_gwei"], "cost_gwei"),
        cumulative_gwei=_need_int(obj["cumulative_gwei"], "cumulative_gwei"),
        work=work,
    )


def read_chain_log(text: str) -> tuple[Consensus, CostModel, list[Block]]:
    """Parse a chain log; raises :class:`ChainFormatError` on any malformed line."""
    if not text.endswith("\n"):
        raise ChainFormatError(0, "file must end with a newline")
    lines = text[:-1].split("\n")
    try:
        header = json.loads(lines[0])
        if not isinstance(header, dict):
            raise ValueError("header must be an object")
        consensus = Consensus(header.get("consensus"))
        keys = {"format", "consensus", "gas_price"}
        if consensus is Consensus.POW:
            keys |= {"pow_difficulty", "pow_hash_cost"}
        _strict_keys(header, keys, "header")
        if header["format"] != LOG_FORMAT:
            raise ValueError("unknown format tag")
        cost = CostModel(
            gas_price=_need_int(header["gas_price"], "gas_price", 1),
            pow_difficulty=_need_int(header.get("pow_difficulty", 0), "pow_difficulty"),
            pow_hash_cost=_need_int(header.get("pow_hash_cost", 1), "pow_hash_cost", 1),
        )
    except (ValueError, TypeError) as exc:
        raise ChainFormatError(0, str(exc)) from None
    blocks = []
    for n, line in enumerate(lines[1:], start=1):
        try:
            blocks.append(_parse_block(json.loads(line)))
        except (ValueError, TypeError, KeyError) as exc:
            raise ChainFormatError(n, str(exc)) from None
    return consensus, cost, blocks


def audit_chain_log(path: str | Path) -> ChainReport:
    """Verify an exported chain log; format faults are reported like hash faults."""
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError:
        return ChainReport(False, None, "file is not valid UTF-8")
    try:
        consensus, cost, blocks = read_chain_log(text)
    except ChainFormatError as exc:
        bad = exc.line - 1 if exc.line > 0 else None
        return ChainReport(False, bad, f"malformed record: {exc}")
    return verify_blocks(blocks, cost, consensus=consensus)
