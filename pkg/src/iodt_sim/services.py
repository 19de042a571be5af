"""Service provisioning: AES-128-CBC sealed payloads anchored by SHA-256 on chain.

A base station serves a stored blob to an authenticated, sufficiently funded
requester: it hashes the plaintext, anchors the hash in a ProvisionService
transaction, encrypts the blob under the requester's 128-bit key and debits
the requester's balance. The receiver decrypts, rehashes and compares with
the anchored value.
"""

from __future__ import annotations

import enum
import hashlib
import os
from dataclasses import dataclass, field
from decimal import Decimal

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .authn import authenticate
from .ledger import Chain, Credentials, TxKind, submit
from .storage import ContentStore, StorageError
from .topology import NodeId

WEI_PER_ETHER = 10**18
BLOCK = 16


def ether(amount: int | float | str) -> int:
    """Convert an ether amount to integer wei."""
    return int(Decimal(str(amount)) * WEI_PER_ETHER)


def _check_len(name: str, value: bytes, length: int = 16) -> None:
    if not isinstance(value, (bytes, bytearray)) or len(value) != length:
        raise ValueError(f"{name} must be exactly {length} bytes")


def aes128_encrypt_block(key: bytes, block: bytes) -> bytes:
    """The bare AES-128 block permutation (one 16-byte block, no mode)."""
    _check_len("key", key)
    _check_len("block", block)
    enc = Cipher(algorithms.AES(bytes(key)), modes.ECB()).encryptor()
    return enc.update(bytes(block)) + enc.finalize()


def encrypt_aes128(key: bytes, plaintext: bytes, iv: bytes) -> bytes:
    """AES-128-CBC with PKCS#7 padding."""
    _check_len("key", key)
    _check_len("iv", iv)
    padder = padding.PKCS7(128).padder()
    padded = padder.update(bytes(plaintext)) + padder.finalize()
    enc = Cipher(algorithms.AES(bytes(key)), modes.CBC(bytes(iv))).encryptor()
    return enc.update(padded) + enc.finalize()


def decrypt_aes128(key: bytes, ciphertext: bytes, iv: bytes) -> bytes:
    """Inverse of :func:`encrypt_aes128`; raises ``ValueError`` on bad padding."""
    _check_len("key", key)
    _check_len("iv", iv)
    if len(ciphertext) == 0 or len(ciphertext) % BLOCK:
        raise ValueError("ciphertext length must be a positive multiple of 16")
    dec = Cipher(algorithms.AES(bytes(key)), modes.CBC(bytes(iv))).decryptor()
    padded = dec.update(bytes(ciphertext)) + dec.finalize()
    unpadder = padding.PKCS7(128).unpadder()
    return unpadder.update(padded) + unpadder.finalize()


def sha256_digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def key_id(key: bytes) -> str:
    """Public handle for a shared key (truncated hash, never the key itself)."""
    return hashlib.sha256(b"key-id:" + bytes(key)).hexdigest()[:16]


@dataclass
class ServiceRequest:
    """A request to be served blob ``requested_cid``.

    ``balance`` is in wei and is debited in place when the request is served.
    ``credentials`` is the triple the requester presents.
    """

    requester: NodeId
    requester_address: bytes
    balance: int
    requested_cid: bytes
    credentials: Credentials | None = None

    def __post_init__(self) -> None:
        if self.balance < 0:
            raise ValueError("balance must be >= 0")
        if len(self.requester_address) != 20:
            raise ValueError("requester_address must be 20 bytes")


@dataclass(frozen=True)
class SealedPayload:
    service_id: int
    ciphertext: bytes
    iv: bytes
    integrity_hash: bytes
    key_id: str
    cid: bytes = field(default=b"")


class RefusalReason(str, enum.Enum):
    IDENTITY = "identity"
    FUNDS = "funds"
    NOT_FOUND = "not_found"


class ProvisionRefused(Exception):
    def __init__(self, reason: RefusalReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


class Verdict(str, enum.Enum):
    INTACT = "intact"
    TAMPERED = "tampered"


class NoAnchorError(LookupError):
    """The payload's service id has no sealed ProvisionService anchor."""


def provision(
    chain: Chain,
    store: ContentStore,
    req: ServiceRequest,
    key: bytes,
    price: int,
    *,
    sender: NodeId,
    round_: int = 0,
    iv: bytes | None = None,
    service_id: int | None = None,
) -> SealedPayload:
    """Serve ``req`` from ``store`` or raise :class:`ProvisionRefused`.

    Nothing is written to the chain and no balance moves on refusal.
    ``price`` is in wei; the check is inclusive (``balance >= price``).
    """
    _check_len("key", key)
    creds = req.credentials
    if creds is None or creds.id != req.requester:
        raise ProvisionRefused(RefusalReason.IDENTITY, "no credentials for requester")
    decision = authenticate(chain, creds)
    if not decision.ok:
        raise ProvisionRefused(RefusalReason.IDENTITY, decision.reason)
    if req.balance < price:
        raise ProvisionRefused(RefusalReason.FUNDS, f"balance {req.balance} wei below price {price} wei")
    try:
        blob = store.retrieve(req.requested_cid, req.requester, round_)
    except StorageError as exc:
        raise ProvisionRefused(RefusalReason.NOT_FOUND, str(exc)) from None
    digest = sha256_digest(blob)
    if service_id is None:
        service_id = chain.service_counter
        chain.service_counter += 1
    tx = chain.make_tx(
        TxKind.PROVISION_SERVICE,
        {"service_id": service_id, "cid": req.requested_cid.hex(), "hash": digest.hex(), "requester": req.requester},
        sender,
        round_,
    )
    submit(chain, tx)
    iv = os.urandom(BLOCK) if iv is None else iv
    ciphertext = encrypt_aes128(key, blob, iv)
    req.balance -= price
    return SealedPayload(service_id, ciphertext, bytes(iv), digest, key_id(key), req.requested_cid)


def anchored_hash(chain: Chain, service_id: int) -> bytes:
    """The sealed integrity hash for ``service_id``."""
    try:
        return chain.anchors[service_id]
    except KeyError:
        raise NoAnchorError(f"no anchor for service {service_id}") from None


def verify_delivery(payload: SealedPayload, key: bytes, chain: Chain) -> Verdict:
    """Decrypt, rehash and compare with the on-chain anchor.

    Raises :class:`NoAnchorError` when the provision has not been sealed yet.
    A wrong key or any ciphertext change yields ``TAMPERED``.
    """
    anchor = anchored_hash(chain, payload.service_id)
    try:
        plaintext = decrypt_aes128(key, payload.ciphertext, payload.iv)
    except ValueError:
        return Verdict.TAMPERED
    return Verdict.INTACT if sha256_digest(plaintext) == anchor else Verdict.TAMPERED
