# %% [markdown]
# # Deployment and radio energy
#
# A default deployment puts 100 drones and 4 cluster-head nodes uniformly on a
# 1000 m square, with base stations at fixed positions. Each radio operation
# costs energy following the first-order model in `iodt_sim.energy`.

# %%
import numpy as np

from iodt_sim.config import EnergyParams, SimConfig
from iodt_sim.energy import aggregation_cost, rx_cost, tx_cost
from iodt_sim.topology import degrees, deploy, distance_to_nearest_bs

config = SimConfig(seed=3)
net = deploy(config, config.seed)
sensors = [n.id for n in net if not n.is_bs]
print(len(sensors), "sensing nodes,", len(net.bs_ids), "base stations")

# %% [markdown]
# Neighbour counts within the communication radius, and distance to the
# closest base station, are the two geometric inputs to head election.

# %%
deg = degrees(net, sensors)
d_bs = np.array([distance_to_nearest_bs(net, i) for i in sensors])
print("degree   min/median/max:", deg.min(), int(np.median(deg)), deg.max())
print("d to BS  min/median/max: %.0f %.0f %.0f m" % (d_bs.min(), np.median(d_bs), d_bs.max()))

# %% [markdown]
# ## Transmit cost against distance
#
# Below the crossover distance the cost grows with d², above it with d⁴.

# %%
p = EnergyParams()
d0 = np.sqrt(p.eps_fs / p.eps_mp)
print("crossover distance d0 = %.1f m" % d0)
for d in (10, 50, d0, 100, 200, 400):
    print("%6.1f m  tx %.3e J" % (d, tx_cost(p, p.packet_bits, d)))

# %%
print("rx  %.3e J per packet" % rx_cost(p, p.packet_bits))
print("agg %.3e J per packet" % aggregation_cost(p, p.packet_bits))
