"""Adversary injection: Sybil identity forgery and man-in-the-middle tampering/flooding.

Attackers are extra nodes flagged ``malicious`` and placed at random on the
field when the scenario starts. Sybil attackers present forged credentials;
MITM attackers stay outside the network, tamper with packets in flight and
flood the nearest cluster head with junk.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import events as ev
from .authn import AuthOutcome, authenticate, evict
from .config import AttackKind, AttackScenario, EnergyParams
from .energy import rx_cost, try_spend, tx_cost
from .events import Event
from .ledger import Chain, Credentials
from .services import SealedPayload
from .topology import Network, Node, NodeId, Role, distance, nearest_bs

# fields a forger may get wrong on a cloned id
FORGEABLE = ("mac", "reputation")


def spawn_attackers(net: Network, chain: Chain, count: int, e0: float, rng: np.random.Generator) -> list[NodeId]:
    """Add ``count`` malicious nodes at uniform positions; they may send but are unregistered."""
    ids = []
    for _ in range(count):
        nid = net.next_id()
        x, y = rng.uniform(0.0, net.field_side, size=2)
        mac = int(rng.integers(0, 1 << 48))
        net.add_node(Node(nid, mac, Role.DRONE, float(x), float(y), e0, malicious=True))
        chain.participants.add(nid)
        ids.append(nid)
    return ids


def forge(genuine: Credentials, wrong: tuple[str, ...], rng: np.random.Generator) -> Credentials:
    """Copy ``genuine`` with every field named in ``wrong`` replaced by a different value."""
    changes = {}
    for name in wrong:
        old = getattr(genuine, name)
        if name == "mac":
            new = old ^ int(rng.integers(1, 1 << 48))
        else:
            new = old + int(rng.choice([-3, -2, -1, 1, 2, 3]))
        changes[name] = new
    return replace(genuine, **changes)


def forgery_masks() -> list[tuple[str, ...]]:
    """All nonempty subsets of the forgeable fields."""
    return [c for r in range(1, len(FORGEABLE) + 1) for c in itertools.combinations(FORGEABLE, r)]


@dataclass
class SybilAttack:
    scenario: AttackScenario
    attackers: list[NodeId] = field(default_factory=list)
    attempts: int = 0
    authenticated: int = 0
    cloned_attackers: set[NodeId] = field(default_factory=set)

    def step(self, net: Network, chain: Chain, round_: int, rng: np.random.Generator) -> list[Event]:
        """One forged authentication attempt per active attacker."""
        out: list[Event] = []
        registered = sorted(i for i in chain.credential_index if i in net and not net[i].malicious)
        masks = forgery_masks()
        for aid in self.attackers:
            if not net[aid].active:
                continue
            clone = bool(registered) and rng.random() < 0.5
            if clone:
                target = registered[int(rng.integers(len(registered)))]
                mask = masks[int(rng.integers(len(masks)))]
                presented = forge(chain.credential_index[target], mask, rng)
                self.cloned_attackers.add(aid)
            else:
                fresh = _fresh_id(chain, net, rng)
                presented = Credentials(fresh, int(rng.integers(0, 1 << 48)), 0)
            decision = authenticate(chain, presented, source=aid)
            self.attempts += 1
            if decision.ok:
                self.authenticated += 1
                continue
            out.append(Event(round_, ev.AUTH_FAIL, aid, f"{decision.outcome.value}: claimed id {presented.id}"))
            if decision.outcome is AuthOutcome.NOT_AUTHENTICATED:
                evict(net, aid, chain)
                out.append(Event(round_, ev.EVICTION, aid, f"forged credentials for id {presented.id}"))
        return out


def _fresh_id(chain: Chain, net: Network, rng: np.random.Generator) -> NodeId:
    while True:
        candidate = int(rng.integers(10**6, 10**9))
        if candidate not in chain.credential_index and candidate not in net:
            return candidate


def inject_sybil(
    net: Network,
    chain: Chain,
    scenario: AttackScenario,
    rng: np.random.Generator,
    round_: int = 0,
    state: SybilAttack | None = None,
    e0: float = 0.5,
) -> tuple[SybilAttack, list[Event]]:
    """Run one round of a Sybil scenario; spawns the attackers on first use."""
    if scenario.kind is not AttackKind.SYBIL:
        raise ValueError("scenario is not a Sybil attack")
    if state is None:
        state = SybilAttack(scenario, spawn_attackers(net, chain, scenario.attacker_count, e0, rng))
    if not scenario.active(round_):
        return state, []
    return state, state.step(net, chain, round_, rng)


@dataclass
class MitmAttack:
    """Packet tampering plus junk flooding.

    ``payloads_seen`` counts service payloads delivered while the attack was
    present; ``tampered_payloads`` / ``flagged_payloads`` those modified in
    flight and those caught by delivery verification.
    """

    scenario: AttackScenario
    attackers: list[NodeId] = field(default_factory=list)
    payloads_seen: int = 0
    tampered_packets: int = 0
    flood_packets: int = 0
    tampered_payloads: int = 0
    flagged_payloads: int = 0
    attacker_drain: float = 0.0
    victim_drain: float = 0.0
    death_rounds: dict[NodeId, int] = field(default_factory=dict)

    def present(self, net: Network, round_: int) -> bool:
        return self.scenario.active(round_) and any(net[a].active for a in self.attackers)

    def should_tamper(self, rng: np.random.Generator) -> bool:
        p = self.scenario.tamper_probability
        return p > 0 and (p >= 1 or rng.random() < p)

    def flood(self, net: Network, heads: tuple[NodeId, ...], energy: EnergyParams, round_: int) -> tuple[list[Event], dict[NodeId, float]]:
        """Each live attacker sends ``flood_rate`` junk packets at its nearest head.

        Returns the events and the joules drained from legitimate victims.
        """
        out: list[Event] = []
        drained: dict[NodeId, float] = {}
        bits = energy.packet_bits
        live_heads = [h for h in heads if net[h].active]
        for aid in self.attackers:
            attacker = net[aid]
            if not attacker.active or self.scenario.flood_rate == 0:
                continue
            if live_heads:
                victim = min((net[h] for h in live_heads), key=lambda h: (distance(attacker, h), h.id))
            else:
                victim = net[nearest_bs(net, aid)]
            d = distance(attacker, victim)
            sent = 0
            for _ in range(self.scenario.flood_rate):
                ok, taken = try_spend(attacker, tx_cost(energy, bits, d))
                self.attacker_drain += taken
                if not ok:
                    break
                sent += 1
                if not victim.is_bs and victim.active:
                    _, got = try_spend(victim, rx_cost(energy, bits))
                    drained[victim.id] = drained.get(victim.id, 0.0) + got
                    self.victim_drain += got
            if sent:
                self.flood_packets += sent
                out.append(Event(round_, ev.FLOOD, aid, f"junk to node {victim.id}", sent))
                out.append(Event(round_, ev.DROP, victim.id, f"junk from unauthenticated node {aid}", sent))
            if not attacker.active and aid not in self.death_rounds:
                self.death_rounds[aid] = round_
                out.append(Event(round_, ev.DEATH, aid, "attacker exhausted"))
        return out, drained


def inject_mitm(
    net: Network,
    chain: Chain,
    scenario: AttackScenario,
    rng: np.random.Generator,
    round_: int = 0,
    state: MitmAttack | None = None,
    heads: tuple[NodeId, ...] = (),
    energy: EnergyParams = EnergyParams(),
    e0: float = 0.5,
) -> tuple[MitmAttack, list[Event], dict[NodeId, float]]:
    """Run the flooding half of one MITM round; tampering is applied by the engine in flight."""
    if scenario.kind is not AttackKind.MITM:
        raise ValueError("scenario is not a MITM attack")
    if state is None:
        state = MitmAttack(scenario, spawn_attackers(net, chain, scenario.attacker_count, e0, rng))
    if not scenario.active(round_):
        return state, [], {}
    out, drained = state.flood(net, heads, energy, round_)
    return state, out, drained


def tamper_bytes(data: bytes, rng: np.random.Generator) -> bytes:
    """Flip one random byte of ``data`` to a different value."""
    pos = int(rng.integers(len(data)))
    buf = bytearray(data)
    buf[pos] ^= int(rng.integers(1, 256))
    return bytes(buf)


def tamper_payload(payload: SealedPayload, rng: np.random.Generator) -> SealedPayload:
    """Modify one byte of the IV-plus-ciphertext stream of ``payload``."""
    stream = tamper_bytes(payload.iv + payload.ciphertext, rng)
    return replace(payload, iv=stream[:16], ciphertext=stream[16:])


def packet_tag(key: bytes, payload: bytes) -> bytes:
    """Integrity tag carried by data packets: SHA-256 over the sender key and payload."""
    return hashlib.sha256(key + payload).digest()
