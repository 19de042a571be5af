import json

import pytest

from iodt_sim.config import (
    AttackKind, AttackScenario, ConfigError, CostModel, EnergyParams, Protocol, SimConfig, apply_overrides, from_dict,
    load, to_dict,
)


def test_defaults():
    c = SimConfig()
    assert (c.drones, c.ch_slots, c.bs_count, c.field_side) == (100, 4, 2, 1000.0)
    assert c.rotation_threshold == pytest.approx(0.05)
    assert c.cost.tx_cost("register") == 50_000


def test_roundtrip_through_json():
    c = SimConfig(protocol="leach", attack=AttackScenario(AttackKind.MITM, 3, 2, 9, 4, 0.25), bs_positions=((1, 2), (3, 4)))
    again = from_dict(json.loads(json.dumps(to_dict(c))))
    assert again == c and again.protocol is Protocol.LEACH


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        from_dict({"dronez": 5})
    with pytest.raises(ConfigError, match="unknown energy keys"):
        from_dict({"energy": {"e_elek": 1}})


@pytest.mark.parametrize("bad", [
    {"drones": 0}, {"max_rounds": 0}, {"leach_p": 1.0}, {"protocol": "heed"}, {"drones": "x"},
    {"attack": {"start_round": 5, "end_round": 1}}, {"attack": {"tamper_probability": 1.5}},
    {"cost": {"pow_difficulty": 40}}, {"cost": {"gas_schedule": {"bogus": 1}}}, {"energy": {"packet_bits": 0}},
])
def test_invalid_values(bad):
    with pytest.raises(ConfigError):
        from_dict(bad)


def test_overrides():
    c = apply_overrides(SimConfig(), ["drones=50", "energy.e_elec=1e-8", "attack.kind=\"mitm\"", "consensus=pow"])
    assert c.drones == 50 and c.energy.e_elec == 1e-8 and c.attack.kind is AttackKind.MITM
    c = apply_overrides(c, {"cost.pow_difficulty": 8})
    assert c.cost.pow_difficulty == 8
    with pytest.raises(ConfigError):
        apply_overrides(SimConfig(), ["nope=1"])
    with pytest.raises(ConfigError):
        apply_overrides(SimConfig(), ["drones"])


def test_load(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"drones": 12, "energy": {"packet_bits": 2000}}))
    c = load(p)
    assert c.drones == 12 and c.energy == EnergyParams(packet_bits=2000)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load(p)
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.json")


def test_attack_window():
    s = AttackScenario(start_round=3, end_round=5)
    assert [s.active(r) for r in range(2, 7)] == [False, True, True, True, False]
    assert AttackScenario().active(10**6)
    assert CostModel(gas_schedule={"register": 1}).gas_schedule["authenticate"] == 30_000
