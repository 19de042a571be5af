# %% [markdown]
# # Ledger, registration and authentication
#
# Base stations are the validators. Nodes register a credential triple
# (id, MAC, reputation); later authentication succeeds only on an exact
# match with the sealed record.

# %%
import numpy as np

from iodt_sim.authn import authenticate, credentials_of, register
from iodt_sim.config import Consensus, CostModel, SimConfig
from iodt_sim.ledger import Chain, Credentials, seal, verify_chain
from iodt_sim.topology import deploy

config = SimConfig(drones=10, ch_slots=0, seed=1)
net = deploy(config, config.seed)
chain = Chain(list(net.bs_ids), set(net.nodes), CostModel())
for n in net:
    if not n.is_bs:
        register(chain, credentials_of(net, n.id))
block = seal(chain, 0, Consensus.POA)
print("block", block.index, "sealed by", block.sealer, "with", len(block.txs), "txs")

# %%
genuine = chain.credential_index[3]
print(authenticate(chain, genuine).outcome.value)
print(authenticate(chain, Credentials(3, genuine.mac ^ 1, genuine.reputation)).outcome.value)
print(authenticate(chain, Credentials(999, 0, 0)).outcome.value)

# %% [markdown]
# ## Proof of work
#
# The same transactions sealed under PoW need a nonce whose block hash has
# 12 leading zero bits, about 4096 attempts on average. Every attempt is
# charged on top of gas.

# %%
rng = np.random.default_rng(2)
pow_chain = Chain(list(net.bs_ids), set(net.nodes), CostModel(pow_difficulty=12))
for n in net:
    if not n.is_bs:
        register(pow_chain, credentials_of(net, n.id))
b = seal(pow_chain, 0, Consensus.POW, rng)
print("nonce", b.work.nonce, "after", b.work.attempts, "attempts, hash", b.hash.hex()[:12])
print("PoA gwei", chain.cumulative_gwei, "PoW gwei", pow_chain.cumulative_gwei)
print("valid:", bool(verify_chain(pow_chain)))
