import hashlib

import pytest
from hypothesis import given, settings, strategies as st

from iodt_sim.ledger import TxKind, seal_poa
from iodt_sim.storage import (
    AccessDenied, ContentNotFound, ContentStore, InsufficientPayment, IntegrityError, PinExpired, cid_of,
)

from .conftest import make_chain, make_network

BS = 3


def setup(rate=10):
    net = make_network([(0, 0), (1, 1), (2, 2)], bs=((5, 5),))
    chain = make_chain(net)
    chain.sessions.update({0, 1})
    return chain, ContentStore(chain, rate)


def test_store_then_retrieve_window():
    chain, store = setup()
    cid = store.store(b"x", 10, 100, sender=BS, round_=0)
    assert cid == hashlib.sha256(b"x").digest()
    for r in range(10):
        assert store.retrieve(cid, 0, r) == b"x"
    with pytest.raises(PinExpired):
        store.retrieve(cid, 0, 10)


def test_same_blob_twice_extends_pin():
    chain, store = setup()
    a = store.store(b"blob", 5, 50, sender=BS, round_=0)
    b = store.store(b"blob", 5, 50, sender=BS, round_=2)
    assert a == b and len(store) == 1
    assert store.records[a].pinned_until == 9
    assert store.records[a].incentive_balance == 100


def test_underpayment_by_one_refused_without_side_effects():
    chain, store = setup(rate=7)
    with pytest.raises(InsufficientPayment):
        store.store(b"y", 3, 3 * 7 - 1, sender=BS)
    assert len(store) == 0 and chain.pending == [] and store.accepted_payments == 0
    store.store(b"y", 3, 21, sender=BS)
    assert len(store) == 1


def test_unauthenticated_and_missing():
    chain, store = setup()
    cid = store.store(b"z", 5, 50, sender=BS)
    with pytest.raises(AccessDenied):
        store.retrieve(cid, 2, 0)
    with pytest.raises(ContentNotFound):
        store.retrieve(cid_of(b"other"), 0, 0)


def test_integrity_error_on_corruption():
    chain, store = setup()
    cid = store.store(b"abc", 5, 50, sender=BS)
    store.records[cid].blob = b"abd"
    with pytest.raises(IntegrityError):
        store.retrieve(cid, 0, 0)


def test_expire_counts_and_settles():
    chain, store = setup()
    assert store.expire(0) == 0
    for blob in (b"a", b"b", b"c"):
        store.store(blob, 2, 20, sender=BS, round_=0)
    store.store(b"d", 5, 50, sender=BS, round_=0)
    assert store.expire(2) == 3
    assert store.settled_payments == 60 and store.live_balance() == 50
    assert store.expire(2) == 0


def test_restore_after_expiry():
    chain, store = setup()
    cid = store.store(b"w", 2, 20, sender=BS, round_=0)
    store.expire(5)
    with pytest.raises(PinExpired):
        store.retrieve(cid, 0, 5)
    assert store.store(b"w", 3, 30, sender=BS, round_=5) == cid
    assert store.retrieve(cid, 0, 7) == b"w"
    with pytest.raises(PinExpired):
        store.retrieve(cid, 0, 8)


def test_each_store_anchors_one_store_hash():
    chain, store = setup()
    cids = [store.store(bytes([i]), 1, 10, sender=BS, round_=0) for i in range(5)]
    seal_poa(chain, 0)
    anchored = [t.payload["cid"] for t in chain.transactions(TxKind.STORE_HASH)]
    assert anchored == [c.hex() for c in cids]
    assert len(list(chain.transactions(TxKind.PIN_PAYMENT))) == 5


def test_dump(tmp_path):
    chain, store = setup()
    cid = store.store(b"dumped", 1, 10, sender=BS)
    (path,) = store.dump(tmp_path)
    assert path.name == cid.hex() and path.read_bytes() == b"dumped"


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=2048))
def test_roundtrip_any_bytes(blob):
    chain, store = setup()
    cid = store.store(blob, 1, 10, sender=BS)
    assert store.retrieve(cid, 1, 0) == blob


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.binary(max_size=8), st.integers(1, 6), st.integers(0, 3)), max_size=30))
def test_payment_conservation(ops):
    chain, store = setup()
    r = 0
    for blob, pin, step in ops:
        store.store(blob, pin, pin * 10 + step, sender=BS, round_=r)
        r += step
        store.expire(r)
        assert store.live_balance() == store.accepted_payments - store.settled_payments
