# %% [markdown]
# # Sybil and man-in-the-middle scenarios
#
# Sybil attackers present forged triples: cloned ids with a wrong MAC or
# reputation get evicted, fresh ids are told to register. MITM attackers
# flood the nearest head with junk and tamper with traffic in flight.

# %%
from iodt_sim.config import AttackKind, AttackScenario, SimConfig
from iodt_sim.sim import run

sybil = run(SimConfig(drones=30, ch_slots=2, max_rounds=50, seed=4,
                      attack=AttackScenario(AttackKind.SYBIL, attacker_count=20)))
s = sybil.attack
print("attempts", s.attempts, "authenticated", s.authenticated,
      "clone attempts evicted", len(s.cloned_attackers))

# %% [markdown]
# ## Tamper detection rate
#
# Every tampered service payload fails its hash check. The flagged fraction
# tracks the tamper probability.

# %%
for p in (0.25, 0.5, 1.0):
    cfg = SimConfig(seed=0, services_per_round=10, max_rounds=300,
                    attack=AttackScenario(AttackKind.MITM, attacker_count=3, start_round=5,
                                          tamper_probability=p))
    m = run(cfg).attack
    print("p=%.2f  flagged %4d / %4d payloads = %.3f" % (p, m.flagged_payloads, m.payloads_seen,
                                                        m.flagged_payloads / m.payloads_seen))

# %% [markdown]
# Flooding costs the victims receive energy, so the network dies sooner.

# %%
base = run(SimConfig(seed=1))
flooded = run(SimConfig(seed=1, attack=AttackScenario(AttackKind.MITM, flood_rate=5)))
print("lifetime without attack", base.lifetime, "with flooding", flooded.lifetime)
