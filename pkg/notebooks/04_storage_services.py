# %% [markdown]
# # Content storage and sealed service delivery
#
# Blobs are addressed by their SHA-256 and pinned for a paid number of
# rounds. Serving a blob anchors its hash on chain, then ships it encrypted
# with AES-128-CBC; the receiver checks the decrypted hash against the anchor.

# %%
from iodt_sim.authn import credentials_of, register
from iodt_sim.config import Consensus, SimConfig
from iodt_sim.ledger import Chain, seal
from iodt_sim.services import ServiceRequest, Verdict, ether, provision, verify_delivery
from iodt_sim.storage import ContentStore, PinExpired
from iodt_sim.topology import deploy

config = SimConfig(drones=4, ch_slots=0, seed=2)
net = deploy(config, config.seed)
chain = Chain(list(net.bs_ids), set(net.nodes))
for i in range(config.drones):
    register(chain, credentials_of(net, i))
seal(chain, 0, Consensus.POA)
chain.sessions.add(1)

store = ContentStore(chain, pin_rate=10)
cid = store.store(b"aggregated readings, cluster 0", pin_rounds=5, payment=50, sender=0, round_=0)
print(cid.hex())

# %%
key = bytes(range(16))
request = ServiceRequest(1, bytes(20), ether(1), cid, credentials_of(net, 1))
payload = provision(chain, store, request, key, ether("0.01"), sender=net.bs_ids[0], round_=1, iv=bytes(16))
seal(chain, 1, Consensus.POA)
print(verify_delivery(payload, key, chain).value)

# %% [markdown]
# A single flipped ciphertext byte is caught, and so is a wrong key.

# %%
import dataclasses

bad = bytearray(payload.ciphertext)
bad[3] ^= 0x40
print(verify_delivery(dataclasses.replace(payload, ciphertext=bytes(bad)), key, chain).value)
print(verify_delivery(payload, bytes(16), chain) is Verdict.TAMPERED)

# %%
try:
    store.retrieve(cid, 1, round_=5)
except PinExpired as exc:
    print("refused:", exc)
