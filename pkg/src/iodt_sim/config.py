"""Simulation configuration: dataclasses, JSON loading and ``key=value`` overrides.

Every tunable of a run lives in :class:`SimConfig`. Configs are plain frozen
dataclasses so two runs can be compared field by field, and they round-trip
through :func:`to_dict` / :func:`from_dict` for the CLI's JSON files.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised for any invalid or unparseable configuration."""


class Protocol(str, enum.Enum):
    R2D = "r2d"
    LEACH = "leach"


class Consensus(str, enum.Enum):
    POA = "poa"
    POW = "pow"


class AttackKind(str, enum.Enum):
    SYBIL = "sybil"
    MITM = "mitm"


def _check_types(obj: Any, ints: tuple[str, ...], floats: tuple[str, ...], prefix: str = "") -> None:
    for name in ints:
        v = getattr(obj, name)
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"{prefix}{name} must be an integer, got {v!r}")
    for name in floats:
        v = getattr(obj, name)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"{prefix}{name} must be a number, got {v!r}")


_SIM_INTS = (
    "drones", "ch_slots", "bs_count", "max_rounds", "seed", "pin_rate", "pin_rounds",
    "packets_per_round", "services_per_round", "service_price_wei", "initial_balance_wei",
    "rep_step", "rep_penalty", "rep_min", "rep_max",
)
_SIM_FLOATS = ("field_side", "comm_radius", "e0", "leach_p", "rotation_fraction")


@dataclass(frozen=True)
class EnergyParams:
    """First-order radio model constants, SI units."""

    e_elec: float = 50e-9
    eps_fs: float = 10e-12
    eps_mp: float = 0.0013e-12
    e_da: float = 5e-9
    packet_bits: int = 4000

    def __post_init__(self) -> None:
        _check_types(self, ("packet_bits",), ("e_elec", "eps_fs", "eps_mp", "e_da"), "energy.")
        for name in ("e_elec", "eps_fs", "eps_mp", "e_da", "packet_bits"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"energy.{name} must be finite and > 0, got {value!r}")

    @property
    def d0(self) -> float:
        """Crossover distance between the free-space and multipath regimes."""
        return math.sqrt(self.eps_fs / self.eps_mp)


DEFAULT_GAS_SCHEDULE: dict[str, int] = {
    "register": 50_000,
    "authenticate": 30_000,
    "store_hash": 40_000,
    "provision_service": 45_000,
    "pin_payment": 25_000,
    "reputation_update": 30_000,
}


@dataclass(frozen=True)
class CostModel:
    """Gas schedule plus the proof-of-work hashing price.

    ``gas_schedule`` is keyed by :class:`iodt_sim.ledger.TxKind` values.
    """

    gas_price: int = 1
    gas_schedule: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_GAS_SCHEDULE))
    pow_difficulty: int = 12
    pow_hash_cost: int = 10

    def __post_init__(self) -> None:
        for name in ("gas_price", "pow_hash_cost", "pow_difficulty"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"cost.{name} must be an integer")
        if self.gas_price <= 0 or self.pow_hash_cost <= 0:
            raise ConfigError("cost.gas_price and cost.pow_hash_cost must be > 0")
        if not 0 <= self.pow_difficulty <= 24:
            raise ConfigError("cost.pow_difficulty must lie in [0, 24]")
        schedule = dict(DEFAULT_GAS_SCHEDULE)
        schedule.update(self.gas_schedule)
        unknown = set(schedule) - set(DEFAULT_GAS_SCHEDULE)
        if unknown:
            raise ConfigError(f"cost.gas_schedule has unknown kinds: {sorted(unknown)}")
        if any(not isinstance(g, int) or g <= 0 for g in schedule.values()):
            raise ConfigError("cost.gas_schedule entries must be positive integers")
        object.__setattr__(self, "gas_schedule", schedule)

    def tx_cost(self, kind: str) -> int:
        """Gwei charged for one transaction of ``kind``."""
        return self.gas_schedule[kind] * self.gas_price


@dataclass(frozen=True)
class AttackScenario:
    kind: AttackKind = AttackKind.SYBIL
    attacker_count: int = 10
    start_round: int = 1
    # None: active until the run ends
    end_round: int | None = None
    flood_rate: int = 0
    tamper_probability: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", _enum(AttackKind, self.kind, "attack.kind"))
        _check_types(self, ("attacker_count", "start_round", "flood_rate"), ("tamper_probability",), "attack.")
        if self.end_round is not None:
            _check_types(self, ("end_round",), (), "attack.")
        if self.attacker_count < 0:
            raise ConfigError("attack.attacker_count must be >= 0")
        end = self.start_round if self.end_round is None else self.end_round
        if self.start_round < 0 or self.start_round > end:
            raise ConfigError("attack window requires 0 <= start_round <= end_round")
        if self.flood_rate < 0:
            raise ConfigError("attack.flood_rate must be >= 0")
        if not 0.0 <= self.tamper_probability <= 1.0:
            raise ConfigError("attack.tamper_probability must lie in [0, 1]")

    def active(self, round_: int) -> bool:
        return self.start_round <= round_ and (self.end_round is None or round_ <= self.end_round)


@dataclass(frozen=True)
class SimConfig:
    """All parameters of one simulation run.

    Defaults reproduce the evaluated topology: 100 drones, 4 cluster-head
    slots and 2 base stations on a 1000 m square field.
    """

    drones: int = 100
    ch_slots: int = 4
    bs_count: int = 2
    field_side: float = 1000.0
    comm_radius: float = 150.0
    e0: float = 0.5
    bs_positions: tuple[tuple[float, float], ...] | None = None
    energy: EnergyParams = field(default_factory=EnergyParams)
    protocol: Protocol = Protocol.R2D
    leach_p: float = 0.05
    rotation_fraction: float = 0.1
    consensus: Consensus = Consensus.POA
    cost: CostModel = field(default_factory=CostModel)
    max_rounds: int = 5000
    seed: int = 0
    attack: AttackScenario | None = None
    pin_rate: int = 10
    pin_rounds: int = 100
    packets_per_round: int = 1
    services_per_round: int = 1
    service_price_wei: int = 10**16
    initial_balance_wei: int = 100 * 10**18
    rep_step: int = 1
    rep_penalty: int = 2
    rep_min: int = -10
    rep_max: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "protocol", _enum(Protocol, self.protocol, "protocol"))
        object.__setattr__(self, "consensus", _enum(Consensus, self.consensus, "consensus"))
        _check_types(self, _SIM_INTS, _SIM_FLOATS)
        if self.drones < 1:
            raise ConfigError("drones must be >= 1")
        if self.ch_slots < 0:
            raise ConfigError("ch_slots must be >= 0")
        if self.bs_count < 1:
            raise ConfigError("bs_count must be >= 1")
        if not (self.field_side > 0 and math.isfinite(self.field_side)):
            raise ConfigError("field_side must be > 0")
        if not self.comm_radius > 0:
            raise ConfigError("comm_radius must be > 0")
        if not self.e0 > 0:
            raise ConfigError("e0 must be > 0")
        if not 0.0 < self.leach_p < 1.0:
            raise ConfigError("leach_p must lie in (0, 1)")
        if not 0.0 <= self.rotation_fraction <= 1.0:
            raise ConfigError("rotation_fraction must lie in [0, 1]")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.pin_rate <= 0 or self.pin_rounds < 1:
            raise ConfigError("pin_rate must be > 0 and pin_rounds >= 1")
        if self.packets_per_round < 0 or self.services_per_round < 0:
            raise ConfigError("per-round loads must be >= 0")
        if self.service_price_wei < 0 or self.initial_balance_wei < 0:
            raise ConfigError("balances and prices must be >= 0")
        if not self.rep_min <= 0 <= self.rep_max:
            raise ConfigError("reputation bounds must satisfy rep_min <= 0 <= rep_max")
        if self.rep_step < 0 or self.rep_penalty < 0:
            raise ConfigError("rep_step and rep_penalty must be >= 0")
        if self.bs_positions is not None:
            positions = tuple(tuple(float(c) for c in p) for p in self.bs_positions)
            if len(positions) != self.bs_count or any(len(p) != 2 for p in positions):
                raise ConfigError("bs_positions must list bs_count (x, y) pairs")
            for x, y in positions:
                if not (0 <= x <= self.field_side and 0 <= y <= self.field_side):
                    raise ConfigError("bs_positions must lie inside the field")
            object.__setattr__(self, "bs_positions", positions)

    @property
    def rotation_threshold(self) -> float:
        return self.rotation_fraction * self.e0

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def _enum(cls: type[enum.Enum], value: Any, name: str) -> Any:
    if isinstance(value, cls):
        return value
    try:
        return cls(str(value).lower())
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"{name} must be one of {choices}, got {value!r}") from None


def to_dict(config: SimConfig) -> dict[str, Any]:
    """JSON-compatible dict of ``config`` (enums as their string values)."""

    def convert(obj: Any) -> Any:
        if isinstance(obj, enum.Enum):
            return obj.value
        if dataclasses.is_dataclass(obj):
            return {f.name: convert(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, Mapping):
            return {k: convert(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [convert(v) for v in obj]
        return obj

    return convert(config)


_NESTED = {"energy": EnergyParams, "cost": CostModel, "attack": AttackScenario}


def from_dict(data: Mapping[str, Any]) -> SimConfig:
    """Build a :class:`SimConfig` from a (possibly partial) mapping."""
    if not isinstance(data, Mapping):
        raise ConfigError("config document must be a JSON object")
    known = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _NESTED and value is not None:
            cls = _NESTED[key]
            if not isinstance(value, Mapping):
                raise ConfigError(f"{key} must be an object")
            sub_known = {f.name for f in dataclasses.fields(cls)}
            bad = set(value) - sub_known
            if bad:
                raise ConfigError(f"unknown {key} keys: {sorted(bad)}")
            try:
                kwargs[key] = cls(**value)
            except TypeError as exc:
                raise ConfigError(f"bad {key} section: {exc}") from None
        else:
            kwargs[key] = value
    try:
        return SimConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load(path: str | Path) -> SimConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(data)


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(config: SimConfig, overrides: Mapping[str, Any] | list[str]) -> SimConfig:
    """Apply flat dotted overrides such as ``energy.e_elec=5e-8``.

    ``overrides`` is either a mapping of dotted keys to values or a list of
    ``key=value`` strings (values are parsed as JSON when possible).
    """
    if not isinstance(overrides, Mapping):
        parsed: dict[str, Any] = {}
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep or not key:
                raise ConfigError(f"override must look like key=value, got {item!r}")
            parsed[key.strip()] = _parse_value(raw)
        overrides = parsed
    data = to_dict(config)
    for key, value in overrides.items():
        parts = key.split(".")
        target = data
        for part in parts[:-1]:
            if part == "attack" and target.get("attack") is None:
                target["attack"] = {}
            if part not in target or not isinstance(target[part], dict):
                raise ConfigError(f"unknown config key {key!r}")
            target = target[part]
        leaf = parts[-1]
        if len(parts) == 1 and leaf not in data:
            raise ConfigError(f"unknown config key {key!r}")
        target[leaf] = value
    return from_dict(data)
