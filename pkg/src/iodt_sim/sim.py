"""Round-based engine tying topology, clustering, ledger, storage and services together.

Round 0 is set-up: every node registers, the registrations are sealed and
each drone authenticates. Rounds 1..max_rounds then run the data pipeline:

1. elect or rotate cluster heads,
2. members send one packet each to their head (direct to a base station
   when there is no head),
3. heads aggregate and relay to their nearest base station,
4. base stations pin the aggregates, serve requests and seal a block,
5. active attacks inject forged identities or junk traffic,
6. a :class:`RoundMetrics` row is appended.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import events as ev
from .attacks import MitmAttack, SybilAttack, inject_mitm, inject_sybil, packet_tag, tamper_bytes, tamper_payload
from .authn import authenticate, credentials_of, register
from .clustering import ClusterAssignment, ElectionError, attach_members, eligible_candidates, rotate_if_depleted, select_leach, select_r2d
from .config import AttackKind, ConfigError, Protocol, SimConfig, to_dict
from .energy import aggregation_cost, rx_cost, try_spend, tx_cost
from .events import Event
from .ledger import Chain, seal
from .services import NoAnchorError, ProvisionRefused, ServiceRequest, Verdict, provision, verify_delivery
from .storage import ContentStore, InsufficientPayment
from .topology import Network, NodeId, Role, Status, deploy, distance, nearest_bs

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "round", "alive", "total_energy_j", "throughput_pkts", "cost_gwei",
    "auth_fail", "evictions", "tamper_detected", "drops",
)
EVENTS_HEADER = ("round", "category", "node_id", "detail")

# independent generators per concern, so e.g. an attack never shifts election draws
_STREAM_ELECTION, _STREAM_POW, _STREAM_SERVICE, _STREAM_ATTACK, _STREAM_KEYS = range(1, 6)


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    alive: int
    total_energy: float
    cumulative_throughput: int
    cumulative_cost: int
    auth_fail: int = 0
    evictions: int = 0
    tamper_detected: int = 0
    drops: int = 0
    drained: float = 0.0
    heads: int = 0

    def csv_row(self) -> list[str]:
        return [
            str(self.round), str(self.alive), repr(self.total_energy),
            str(self.cumulative_throughput), str(self.cumulative_cost),
            str(self.auth_fail), str(self.evictions), str(self.tamper_detected), str(self.drops),
        ]


@dataclass
class RunResult:
    config: SimConfig
    metrics: list[RoundMetrics]
    events: list[Event]
    network: Network
    chain: Chain
    store: ContentStore
    attack: SybilAttack | MitmAttack | None = None

    @property
    def lifetime(self) -> int:
        """Last round with at least one alive drone."""
        alive_rounds = [m.round for m in self.metrics if m.alive > 0]
        return alive_rounds[-1] if alive_rounds else -1

    @property
    def first_death(self) -> int | None:
        initial = self.metrics[0].alive
        for m in self.metrics:
            if m.alive < initial:
                return m.round
        return None

    @property
    def final(self) -> RoundMetrics:
        return self.metrics[-1]

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for m in self.metrics:
            w.writerow(m.csv_row())
        return buf.getvalue()

    def events_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVENTS_HEADER)
        for e in self.events:
            w.writerow([e.round, e.category, e.node_id, e.detail if e.count == 1 else f"{e.detail} (x{e.count})"])
        return buf.getvalue()


def node_key(seed: int, node_id: NodeId) -> bytes:
    """128-bit key shared between a node and the base stations."""
    return hashlib.sha256(f"iodt-key:{seed}:{node_id}".encode()).digest()[:16]


def account_address(mac: int) -> bytes:
    return hashlib.sha256(mac.to_bytes(6, "big")).digest()[-20:]


class Engine:
    """One simulation instance. Single threaded; all randomness derives from ``config.seed``."""

    def __init__(self, config: SimConfig, *, stop_when_dead: bool = True, network: Network | None = None):
        self.config = config
        self.stop_when_dead = stop_when_dead
        seed = config.seed
        self.net = network if network is not None else deploy(config, seed)
        self.rng_election = np.random.default_rng([seed, _STREAM_ELECTION])
        self.rng_pow = np.random.default_rng([seed, _STREAM_POW])
        self.rng_service = np.random.default_rng([seed, _STREAM_SERVICE])
        self.rng_attack = np.random.default_rng([seed, _STREAM_ATTACK])
        self.chain = Chain(list(self.net.bs_ids), set(self.net.nodes), config.cost)
        self.store = ContentStore(self.chain, config.pin_rate)
        self.assignment = ClusterAssignment((), {}, 0)
        self.leach_history: dict[NodeId, int] = {}
        self.events: list[Event] = []
        self.metrics: list[RoundMetrics] = []
        self.throughput = 0
        self.balances: dict[NodeId, int] = {}
        self.latest_cid: bytes | None = None
        self.attack: SybilAttack | MitmAttack | None = None
        self.dead_seen: set[NodeId] = set()
        self.round = -1

    # --- helpers ------------------------------------------------------

    def _emit(self, round_: int, category: str, node_id: int, detail: str = "", count: int = 1) -> None:
        self.events.append(Event(round_, category, node_id, detail, count))

    def _drone_energy(self) -> float:
        return float(sum(n.residual_energy for n in self.net.drones()))

    def _record(self, round_: int, drained: float, round_events: Iterable[Event]) -> None:
        counts = dict.fromkeys(ev.COUNTED, 0)
        for e in round_events:
            if e.category in counts:
                counts[e.category] += e.count
        self.metrics.append(
            RoundMetrics(
                round=round_,
                alive=len(self.net.alive_drones()),
                total_energy=self._drone_energy(),
                cumulative_throughput=self.throughput,
                cumulative_cost=self.chain.cumulative_gwei,
                auth_fail=counts[ev.AUTH_FAIL],
                evictions=counts[ev.EVICTION],
                tamper_detected=counts[ev.TAMPER_DETECTED],
                drops=counts[ev.DROP],
                drained=drained,
                heads=len(self.assignment.heads),
            )
        )

    def _seal(self, round_: int) -> None:
        seal(self.chain, round_, self.config.consensus, self.rng_pow)

    def _note_deaths(self, round_: int) -> None:
        for n in self.net.drones():
            if n.residual_energy <= 0.0 and n.id not in self.dead_seen:
                self.dead_seen.add(n.id)
                self._emit(round_, ev.DEATH, n.id, "battery exhausted")

    # --- set-up -------------------------------------------------------

    def setup(self) -> None:
        """Round 0: register every node, seal, then authenticate the drones."""
        start = len(self.events)
        for node in self.net:
            register(self.chain, credentials_of(self.net, node.id), 0)
        self._seal(0)
        for node in self.net.drones():
            decision = authenticate(self.chain, credentials_of(self.net, node.id), round_=1)
            node.authenticated = decision.ok
            if not decision.ok:
                self._emit(0, ev.AUTH_FAIL, node.id, decision.reason)
            self.balances[node.id] = self.config.initial_balance_wei
        self.round = 0
        self._record(0, 0.0, self.events[start:])

    # --- rounds -------------------------------------------------------

    def _elect(self, round_: int) -> None:
        cfg = self.config
        if cfg.protocol is Protocol.LEACH:
            self.assignment = select_leach(self.net, cfg.leach_p, round_, self.rng_election, self.leach_history)
            for h in self.assignment.heads:
                self.leach_history[h] = round_
        else:
            n_eligible = len(eligible_candidates(self.net))
            k = min(cfg.ch_slots, n_eligible)
            if k == 0:
                self.assignment = ClusterAssignment((), {}, round_)
            elif not self.assignment.heads:
                self.assignment = select_r2d(self.net, k, self.rng_election, epoch=round_)
            else:
                before = self.assignment
                self.assignment = rotate_if_depleted(self.net, before, cfg.rotation_threshold, self.rng_election)
                for h in self.assignment.unfilled:
                    if h not in self.assignment.heads:
                        self._emit(round_, ev.WARNING, h, "head slot dropped: no candidate left")
                missing = k - len(self.assignment.heads)
                if missing > 0:
                    pool = [i for i in eligible_candidates(self.net) if i not in self.assignment.heads]
                    try:
                        extra = select_r2d(self.net, missing, self.rng_election, round_, candidates=pool)
                    except ElectionError:
                        extra = None
                    if extra is not None:
                        heads = self.assignment.heads + extra.heads
                        self.assignment = ClusterAssignment(heads, attach_members(self.net, heads), self.assignment.epoch + 1)
        heads = set(self.assignment.heads)
        for n in self.net.drones():
            n.role = Role.CLUSTER_HEAD if n.id in heads else Role.DRONE

    def _deliver(self, round_: int, mitm: MitmAttack | None) -> tuple[float, list[tuple[NodeId, NodeId, list[NodeId]]]]:
        """Steps 2 and 3. Returns joules drained and the (head, bs, sources) aggregates delivered."""
        p = self.config.energy
        bits = p.packet_bits
        drained = 0.0
        tampering = mitm is not None and mitm.present(self.net, round_)
        received: dict[NodeId, list[NodeId]] = {h: [] for h in self.assignment.heads}
        delivered: list[tuple[NodeId, NodeId, list[NodeId]]] = []

        def intact(src: NodeId, hop: str) -> bool:
            if not tampering or not mitm.should_tamper(self.rng_attack):
                return True
            packet = f"{round_}:{src}:{hop}".encode()
            tag = packet_tag(node_key(self.config.seed, src), packet)
            forged = tamper_bytes(packet, self.rng_attack)
            mitm.tampered_packets += 1
            if packet_tag(node_key(self.config.seed, src), forged) != tag:
                self._emit(round_, ev.TAMPER_DETECTED, src, f"{hop} packet failed integrity check")
                return False
            return True

        # evicted nodes may keep transmitting but nothing they send is accepted
        for node in self.net.drones():
            if node.status is Status.EVICTED and node.residual_energy > 0:
                self._emit(round_, ev.DROP, node.id, "sender evicted", self.config.packets_per_round)

        senders = [n for n in self.net.alive_drones() if n.authenticated and n.id not in received]
        for _ in range(self.config.packets_per_round):
            for node in senders:
                if not node.active:
                    continue
                head_id = self.assignment.members.get(node.id)
                if head_id is None:
                    bs = nearest_bs(self.net, node.id)
                    ok, taken = try_spend(node, tx_cost(p, bits, distance(node, self.net[bs])))
                    drained += taken
                    if ok and intact(node.id, "drone->bs"):
                        self.throughput += 1
                    continue
                head = self.net[head_id]
                ok, taken = try_spend(node, tx_cost(p, bits, distance(node, head)))
                drained += taken
                if not ok or not head.active:
                    continue
                ok, taken = try_spend(head, rx_cost(p, bits))
                drained += taken
                if ok and intact(node.id, "drone->ch"):
                    received[head_id].append(node.id)

        for head_id in self.assignment.heads:
            head = self.net[head_id]
            if not head.active:
                continue
            sources = received[head_id] + [head_id] * self.config.packets_per_round
            ok, taken = try_spend(head, aggregation_cost(p, bits) * len(sources))
            drained += taken
            if not ok:
                continue
            bs = nearest_bs(self.net, head_id)
            ok, taken = try_spend(head, tx_cost(p, bits, distance(head, self.net[bs])))
            drained += taken
            if ok and intact(head_id, "ch->bs"):
                self.throughput += len(sources)
                delivered.append((head_id, bs, sources))
        return drained, delivered

    def _store_and_serve(self, round_: int, delivered, mitm: MitmAttack | None) -> None:
        cfg = self.config
        payment = cfg.pin_rounds * cfg.pin_rate
        for head_id, bs, sources in delivered:
            blob = f"round={round_};head={head_id};sources={','.join(map(str, sources))}".encode()
            try:
                self.latest_cid = self.store.store(blob, cfg.pin_rounds, payment, sender=bs, round_=round_)
            except InsufficientPayment as exc:
                self._emit(round_, ev.REFUSAL, bs, str(exc))

        payloads = []
        requesters = [n for n in self.net.alive_drones() if n.authenticated]
        if self.latest_cid is not None and requesters:
            for _ in range(cfg.services_per_round):
                node = requesters[int(self.rng_service.integers(len(requesters)))]
                req = ServiceRequest(
                    node.id, account_address(node.mac), self.balances[node.id],
                    self.latest_cid, credentials_of(self.net, node.id),
                )
                bs = nearest_bs(self.net, node.id)
                key = node_key(cfg.seed, node.id)
                iv = self.rng_service.bytes(16)
                try:
                    payload = provision(self.chain, self.store, req, key, cfg.service_price_wei, sender=bs, round_=round_, iv=iv)
                except ProvisionRefused as exc:
                    self._emit(round_, ev.REFUSAL, node.id, str(exc))
                    continue
                self.balances[node.id] = req.balance
                payloads.append((node.id, key, payload))

        self._seal(round_)
        self.store.expire(round_)

        tampering = mitm is not None and mitm.present(self.net, round_)
        for node_id, key, payload in payloads:
            if tampering:
                mitm.payloads_seen += 1
            if tampering and mitm.should_tamper(self.rng_attack):
                payload = tamper_payload(payload, self.rng_attack)
                mitm.tampered_payloads += 1
            try:
                verdict = verify_delivery(payload, key, self.chain)
            except NoAnchorError:
                self._emit(round_, ev.WARNING, node_id, f"service {payload.service_id} has no anchor")
                continue
            if verdict is Verdict.TAMPERED:
                if mitm is not None:
                    mitm.flagged_payloads += 1
                self._emit(round_, ev.TAMPER_DETECTED, node_id, f"service {payload.service_id} payload tampered")

    def _attack_step(self, round_: int) -> float:
        cfg = self.config
        scenario = cfg.attack
        if scenario is None or scenario.attacker_count == 0:
            return 0.0
        if round_ < scenario.start_round and self.attack is None:
            return 0.0
        if scenario.kind is AttackKind.SYBIL:
            self.attack, out = inject_sybil(
                self.net, self.chain, scenario, self.rng_attack, round_, self.attack, cfg.e0
            )
            self.events.extend(out)
            return 0.0
        self.attack, out, drained = inject_mitm(
            self.net, self.chain, scenario, self.rng_attack, round_, self.attack,
            self.assignment.heads, cfg.energy, cfg.e0,
        )
        self.events.extend(out)
        return float(sum(drained.values()))

    def _ensure_mitm(self, round_: int) -> MitmAttack | None:
        scenario = self.config.attack
        if scenario is None or scenario.kind is not AttackKind.MITM or scenario.attacker_count == 0:
            return None
        if self.attack is None and round_ >= scenario.start_round:
            self.attack, _, _ = inject_mitm(
                self.net, self.chain, scenario, self.rng_attack, -1, None, (), self.config.energy, self.config.e0
            )
        return self.attack if isinstance(self.attack, MitmAttack) else None

    def step(self) -> RoundMetrics:
        round_ = self.round + 1
        start = len(self.events)
        mitm = self._ensure_mitm(round_)
        self._elect(round_)
        drained, delivered = self._deliver(round_, mitm)
        self._store_and_serve(round_, delivered, mitm)
        drained += self._attack_step(round_)
        self._note_deaths(round_)
        self.round = round_
        self._record(round_, drained, self.events[start:])
        return self.metrics[-1]

    def run(self) -> RunResult:
        if self.round < 0:
            self.setup()
        while self.round < self.config.max_rounds:
            m = self.step()
            if self.stop_when_dead and m.alive == 0:
                break
        return RunResult(self.config, self.metrics, self.events, self.net, self.chain, self.store, self.attack)


def run(config: SimConfig, *, stop_when_dead: bool = True) -> RunResult:
    """Run ``config`` to completion."""
    return Engine(config, stop_when_dead=stop_when_dead).run()


# --- paired comparison ------------------------------------------------


class ComparisonRefused(ValueError):
    pass


COMPARABLE_FIELDS = frozenset({"protocol", "consensus"})


@dataclass(frozen=True)
class RunSummary:
    label: str
    lifetime: int
    first_death: int | None
    final_throughput: int
    final_cost: int

    @classmethod
    def of(cls, label: str, result: RunResult) -> "RunSummary":
        return cls(label, result.lifetime, result.first_death, result.final.cumulative_throughput, result.final.cumulative_cost)


@dataclass
class Comparison:
    a: RunSummary
    b: RunSummary
    results: tuple[RunResult, RunResult] = field(repr=False, compare=False, default=None)  # type: ignore[assignment]

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "lifetime", "first_death", "final_throughput", "final_cost_gwei"])
        for s in (self.a, self.b):
            w.writerow([s.label, s.lifetime, "" if s.first_death is None else s.first_death, s.final_throughput, s.final_cost])
        return buf.getvalue()


def differing_fields(a: SimConfig, b: SimConfig) -> set[str]:
    da, db = to_dict(a), to_dict(b)
    return {k for k in da if da[k] != db[k]}


def _label(config: SimConfig, fields: Iterable[str]) -> str:
    parts = [f"{f}={getattr(config, f).value}" for f in sorted(fields)]
    return ",".join(parts) or "baseline"


def compare(config_a: SimConfig, config_b: SimConfig) -> Comparison:
    """Run two configs that differ only in protocol and/or consensus, on one seed."""
    diff = differing_fields(config_a, config_b)
    if diff - COMPARABLE_FIELDS:
        raise ComparisonRefused(f"configs differ in non-comparable fields: {sorted(diff - COMPARABLE_FIELDS)}")
    shown = diff or COMPARABLE_FIELDS & {"protocol"}
    ra, rb = run(config_a), run(config_b)
    return Comparison(RunSummary.of(_label(config_a, shown), ra), RunSummary.of(_label(config_b, shown), rb), (ra, rb))


def write_run(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    """Write metrics.csv, events.csv, chain.log and config.json under ``out_dir``."""
    import json

    from .ledger import export_chain

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out / "metrics.csv",
        "events": out / "events.csv",
        "chain": out / "chain.log",
        "config": out / "config.json",
    }
    paths["metrics"].write_text(result.metrics_csv())
    paths["events"].write_text(result.events_csv())
    export_chain(result.chain, paths["chain"], result.config.consensus)
    paths["config"].write_text(json.dumps(to_dict(result.config), indent=2, sort_keys=True) + "\n")
    return paths


def read_metrics_csv(path: str | Path) -> list[dict[str, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_HEADER:
            raise ConfigError(f"{path}: unexpected metrics header {reader.fieldnames}")
        for row in reader:
            rows.append({k: float(v) for k, v in row.items()})
    return rows
