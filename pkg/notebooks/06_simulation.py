# %% [markdown]
# # Full runs and protocol comparison
#
# One run registers and authenticates every node, then loops: elect heads,
# deliver packets, store and serve aggregates, seal a block. It stops when
# every drone is dead.

# %%
import numpy as np

from iodt_sim.config import Consensus, Protocol, SimConfig
from iodt_sim.sim import compare, run

result = run(SimConfig(seed=0))
print("lifetime", result.lifetime, "first death", result.first_death)
print(result.metrics_csv().splitlines()[0])
print(result.metrics_csv().splitlines()[100])

# %% [markdown]
# ## R2D against LEACH over ten seeds

# %%
life = {p: [] for p in Protocol}
for seed in range(10):
    for p in Protocol:
        life[p].append(run(SimConfig(protocol=p, seed=seed)).lifetime)
for p, v in life.items():
    print(p.value, v, "mean %.0f" % np.mean(v))
print("ratio %.2f" % (np.mean(life[Protocol.R2D]) / np.mean(life[Protocol.LEACH])))

# %% [markdown]
# `compare` only accepts pairs that differ in protocol or consensus.

# %%
report = compare(SimConfig(seed=5, max_rounds=200), SimConfig(seed=5, max_rounds=200, consensus=Consensus.POW))
print(report.csv())
