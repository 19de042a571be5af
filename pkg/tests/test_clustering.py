import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iodt_sim.clustering import (
    ClusterAssignment, ElectionError, attach_members, elect_one, eligible_candidates, leach_threshold,
    rotate_if_depleted, select_leach, select_r2d,
)
from iodt_sim.config import SimConfig
from iodt_sim.topology import Status, deploy

from .conftest import make_network


def brute_force_winners(energy, deg, dist):
    """Independent reimplementation: the triple-criterion set, else the composite argmax set."""
    n = len(energy)
    emax, gmax, dmin = max(energy), max(deg), min(dist)
    triple = [i for i in range(n) if math.isclose(energy[i], emax, rel_tol=1e-9)
              and deg[i] == gmax and math.isclose(dist[i], dmin, rel_tol=1e-9)]
    if triple:
        return set(triple)
    dmax = max(dist)
    score = [energy[i] / emax + (deg[i] / gmax if gmax else 0) - (dist[i] / dmax if dmax else 0) for i in range(n)]
    best = max(score)
    return {i for i in range(n) if math.isclose(score[i], best, rel_tol=1e-9)}


def test_single_candidate():
    net = make_network([(100, 100)], bs=((0, 0),))
    a = select_r2d(net, 1, np.random.default_rng(0))
    assert a.heads == (0,) and a.members == {}


def test_five_node_fixture_picks_node_one():
    energy = np.array([0.5, 0.4, 0.3, 0.2, 0.1])
    deg = np.array([3, 3, 3, 3, 3])
    dist = np.array([10.0, 20.0, 30.0, 40.0, 50.0])
    ids = [1, 2, 3, 4, 5]
    assert brute_force_winners(energy, deg, dist) == {0}
    assert elect_one(energy, deg, dist, ids, np.random.default_rng(0)) == 1


def test_evaluated_topology_elects_four_distinct_heads():
    net = deploy(SimConfig(), 0)
    for n in net.drones():
        n.authenticated = True
    a = select_r2d(net, 4, np.random.default_rng(0))
    assert len(a.heads) == 4 and len(set(a.heads)) == 4
    assert set(a.members) == set(eligible_candidates(net)) - set(a.heads)


def test_shortfall_raises():
    net = make_network([(1, 1), (2, 2)])
    with pytest.raises(ElectionError, match="short by 1"):
        select_r2d(net, 3, np.random.default_rng(0))


def test_unauthenticated_never_elected():
    net = make_network([(1, 1), (2, 2)], authenticated=False)
    net[1].authenticated = True
    assert select_r2d(net, 1, np.random.default_rng(0)).heads == (1,)


def _leach_net(n=100, seed=0):
    rng = np.random.default_rng(seed)
    return make_network([tuple(p) for p in rng.uniform(0, 1000, size=(n, 2))], bs=((500, 500),))


def test_leach_threshold_formula():
    assert leach_threshold(0.05, 0) == pytest.approx(0.05)
    assert leach_threshold(0.05, 19) == pytest.approx(0.05 / (1 - 0.05 * 19))
    assert leach_threshold(0.05, 20) == pytest.approx(0.05)


def test_leach_mean_head_count_near_five():
    net = _leach_net()
    counts = [len(select_leach(net, 0.05, 0, np.random.default_rng(s)).heads) for s in range(1000)]
    assert abs(np.mean(counts) - 5.0) <= 1.0


def test_leach_deterministic_and_empty_when_dead():
    net = _leach_net(seed=2)
    a = select_leach(net, 0.05, 3, np.random.default_rng(9))
    b = select_leach(net, 0.05, 3, np.random.default_rng(9))
    assert a == b
    for n in net.drones():
        n.status = Status.DEAD
    assert select_leach(net, 0.05, 3, np.random.default_rng(9)).heads == ()


def test_leach_recent_heads_ineligible():
    net = _leach_net(n=30)
    history = {i: 10 for i in range(30)}
    assert select_leach(net, 0.5, 11, np.random.default_rng(0), history).heads == ()
    # a full period later everyone may serve again; p=0.5 at round%2==1 gives threshold 1
    assert len(select_leach(net, 0.5, 13, np.random.default_rng(0), history).heads) == 30


def test_rotation_noop_when_healthy():
    net = make_network([(10, 0), (20, 0), (900, 0)])
    a = select_r2d(net, 1, np.random.default_rng(0))
    assert rotate_if_depleted(net, a, 0.05, np.random.default_rng(1)) is a


def test_rotation_replaces_dead_head():
    net = make_network([(10, 0), (20, 0)], energies=[0.5, 0.5])
    a = ClusterAssignment((0,), {1: 0}, epoch=3)
    net[0].residual_energy = 0.0
    net[0].status = Status.DEAD
    b = rotate_if_depleted(net, a, 0.05, np.random.default_rng(0))
    assert b.heads == (1,) and b.epoch == 4 and b.members == {}


def test_rotation_keeps_low_head_without_replacement():
    net = make_network([(10, 0), (20, 0)], energies=[0.01, 0.01])
    a = ClusterAssignment((0,), {1: 0})
    b = rotate_if_depleted(net, a, 0.05, np.random.default_rng(0))
    assert b.heads == (0,) and b.unfilled == (0,)
    # the report does not linger once nothing needs replacing
    assert rotate_if_depleted(net, b, 0.0, np.random.default_rng(0)).unfilled == ()


def test_rotation_uniform_among_equal_candidates():
    # three candidates equidistant from the BS, isolated, equal energy
    pts = [(500, 300), (600, 500), (400, 500), (500, 600)]
    counts = {1: 0, 2: 0, 3: 0}
    trials = 3000
    for seed in range(trials):
        net = make_network(pts, bs=((500, 500),), radius=10)
        net[0].residual_energy = 0.0
        net[0].status = Status.DEAD
        a = ClusterAssignment((0,), {})
        counts[rotate_if_depleted(net, a, 0.05, np.random.default_rng(seed)).heads[0]] += 1
    expected = trials / 3
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 13.82  # df=2, p=0.001
    net = make_network(pts, bs=((500, 500),), radius=10)
    net[0].status = Status.DEAD
    r1 = rotate_if_depleted(net, ClusterAssignment((0,), {}), 0.05, np.random.default_rng(5))
    r2 = rotate_if_depleted(net, ClusterAssignment((0,), {}), 0.05, np.random.default_rng(5))
    assert r1 == r2


fixture = st.lists(
    st.tuples(st.floats(0.01, 1.0), st.integers(0, 6), st.floats(1.0, 1000.0)), min_size=1, max_size=12
)


@settings(max_examples=200, deadline=None)
@given(fixture, st.integers(0, 2**32 - 1))
def test_elect_one_matches_brute_force(rows, seed):
    energy = np.array([r[0] for r in rows])
    deg = np.array([r[1] for r in rows])
    dist = np.array([r[2] for r in rows])
    ids = list(range(100, 100 + len(rows)))
    winner = elect_one(energy, deg, dist, ids, np.random.default_rng(seed))
    assert winner - 100 in brute_force_winners(list(energy), list(deg), list(dist))


@settings(max_examples=100, deadline=None)
@given(fixture, st.floats(0.001, 1000.0), st.integers(0, 2**32 - 1))
def test_energy_scaling_invariance(rows, c, seed):
    energy = np.array([r[0] for r in rows])
    deg = np.array([r[1] for r in rows])
    dist = np.array([r[2] for r in rows])
    ids = list(range(len(rows)))
    a = elect_one(energy, deg, dist, ids, np.random.default_rng(seed))
    b = elect_one(energy * c, deg, dist, ids, np.random.default_rng(seed))
    assert a == b


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.lists(st.integers(0, 29), max_size=10))
def test_heads_alive_and_membership_nearest(seed, k, dead):
    rng = np.random.default_rng(seed)
    net = make_network([tuple(p) for p in rng.uniform(0, 1000, size=(30, 2))], bs=((500, 500),))
    for d in dead:
        net[d].status = Status.DEAD if d % 2 else Status.EVICTED
    k = min(k, len(eligible_candidates(net)))
    a = select_r2d(net, k, np.random.default_rng(seed))
    b = select_r2d(net, k, np.random.default_rng(seed))
    assert a == b
    assert all(net[h].active for h in a.heads)
    for m, h in a.members.items():
        assert net[m].active and m not in a.heads
        dm = math.dist(net[m].position, net[h].position)
        assert all(dm <= math.dist(net[m].position, net[o].position) for o in a.heads)
    assert set(a.members) | set(a.heads) == set(eligible_candidates(net))
    leach = select_leach(net, 0.2, seed, np.random.default_rng(seed))
    assert all(net[h].active for h in leach.heads)


def test_attach_members_tie_goes_to_lower_id():
    net = make_network([(0, 0), (10, 0), (5, 0)])
    assert attach_members(net, (1, 0)) == {2: 0}
