"""Cluster-head election: R2D (energy, degree, distance) and the LEACH baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .topology import Network, NodeId, degrees, distance, distance_to_nearest_bs

log = logging.getLogger(__name__)

# relative tolerance when deciding that two criterion values tie
TIE_RTOL = 1e-9


class ElectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    heads: tuple[NodeId, ...]
    members: Mapping[NodeId, NodeId]
    epoch: int = 0
    # head slots that could not be refilled during rotation
    unfilled: tuple[NodeId, ...] = field(default=())

    def cluster(self, head: NodeId) -> list[NodeId]:
        return [m for m, h in self.members.items() if h == head]


def eligible_candidates(net: Network) -> list[NodeId]:
    """Active, authenticated, legitimate sensing nodes, in id order."""
    return [n.id for n in net.drones() if n.active and n.authenticated]


def attach_members(net: Network, heads: tuple[NodeId, ...] | list[NodeId]) -> dict[NodeId, NodeId]:
    """Map every eligible non-head node to its nearest head (ties to lower id)."""
    if not heads:
        return {}
    head_nodes = [net[h] for h in heads]
    heads_set = set(heads)
    members: dict[NodeId, NodeId] = {}
    for nid in eligible_candidates(net):
        if nid in heads_set:
            continue
        node = net[nid]
        best = min(head_nodes, key=lambda h: (distance(node, h), h.id))
        members[nid] = best.id
    return members


def _ties(values: np.ndarray, best: float) -> np.ndarray:
    return np.isclose(values, best, rtol=TIE_RTOL, atol=0.0)


def _pick(rng: np.random.Generator, ids: list[NodeId]) -> NodeId:
    if len(ids) == 1:
        return ids[0]
    return ids[int(rng.integers(len(ids)))]


def elect_one(
    energy: np.ndarray,
    deg: np.ndarray,
    dist: np.ndarray,
    ids: list[NodeId],
    rng: np.random.Generator,
) -> NodeId:
    """Fill one head slot from the candidate arrays.

    A node that simultaneously has the maximum energy, the maximum degree and
    the minimum distance to a base station wins outright; several such nodes
    are drawn from uniformly. Otherwise the normalised score
    ``E/E_max + deg/deg_max - d/d_max`` decides, again with uniform ties.
    """
    if not ids:
        raise ElectionError("no candidates")
    best_e = _ties(energy, energy.max())
    best_deg = deg == deg.max()
    best_d = _ties(dist, dist.min())
    winners = np.flatnonzero(best_e & best_deg & best_d)
    if winners.size:
        return _pick(rng, [ids[i] for i in winners])
    e_max, deg_max, d_max = energy.max(), deg.max(), dist.max()
    score = energy / e_max if e_max > 0 else np.zeros_like(energy)
    if deg_max > 0:
        score = score + deg / deg_max
    if d_max > 0:
        score = score - dist / d_max
    top = np.flatnonzero(_ties(score, score.max()))
    return _pick(rng, [ids[i] for i in top])


def _criteria(net: Network, ids: list[NodeId]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    energy = np.array([net[i].residual_energy for i in ids], dtype=float)
    deg = degrees(net, ids)
    dist = np.array([distance_to_nearest_bs(net, i) for i in ids], dtype=float)
    return energy, deg, dist


def _elect_slots(
    net: Network, ids: list[NodeId], k: int, rng: np.random.Generator
) -> list[NodeId]:
    energy, deg, dist = _criteria(net, ids)
    pool = list(range(len(ids)))
    chosen: list[NodeId] = []
    for _ in range(k):
        sub = [ids[i] for i in pool]
        winner = elect_one(energy[pool], deg[pool], dist[pool], sub, rng)
        chosen.append(winner)
        pool.remove(ids.index(winner))
    return chosen


def select_r2d(
    net: Network,
    k: int,
    rng: np.random.Generator,
    epoch: int = 0,
    candidates: list[NodeId] | None = None,
) -> ClusterAssignment:
    """Elect ``k`` heads slot by slot; each winner leaves the pool before the next slot."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = eligible_candidates(net) if candidates is None else list(candidates)
    if len(ids) < k:
        raise ElectionError(f"need {k} eligible nodes, only {len(ids)} available (short by {k - len(ids)})")
    heads = tuple(_elect_slots(net, ids, k, rng))
    return ClusterAssignment(heads, attach_members(net, heads), epoch)


def leach_period(p: float) -> int:
    """floor(1/p), robust to 1/p landing just below an integer (1 // 0.05 == 19.0)."""
    return int(math.floor(1.0 / p + 1e-9))


def leach_threshold(p: float, round_: int) -> float:
    period = leach_period(p)
    return p / (1.0 - p * (round_ % period))


def select_leach(
    net: Network,
    p: float,
    round_: int,
    rng: np.random.Generator,
    last_head_round: Mapping[NodeId, int] | None = None,
) -> ClusterAssignment:
    """Classic LEACH thresholding.

    ``last_head_round`` records when each node last served; nodes that served
    within the last ``floor(1/p)`` rounds are not eligible. One uniform draw is
    consumed per eligible node, in id order.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    history = last_head_round or {}
    period = leach_period(p)
    threshold = leach_threshold(p, round_)
    eligible = [
        i for i in eligible_candidates(net)
        if i not in history or round_ - history[i] >= period
    ]
    draws = rng.random(len(eligible))
    heads = tuple(i for i, u in zip(eligible, draws) if u < threshold)
    return ClusterAssignment(heads, attach_members(net, heads), round_)


def rotate_if_depleted(
    net: Network,
    current: ClusterAssignment,
    threshold: float,
    rng: np.random.Generator,
) -> ClusterAssignment:
    """Replace heads whose residual energy fell below ``threshold``.

    Replacements are elected with the R2D slot rule from non-head candidates
    holding at least ``threshold``. A low but living head with no such
    replacement is kept and reported in ``unfilled``; a dead or evicted head
    with no replacement falls back to any remaining candidate, or its slot
    is dropped.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    eligible = set(eligible_candidates(net))
    stale = [h for h in current.heads if h not in eligible or net[h].residual_energy < threshold]
    if not stale:
        members = attach_members(net, current.heads)
        if members == dict(current.members) and not current.unfilled:
            return current
        return ClusterAssignment(current.heads, members, current.epoch)

    heads = list(current.heads)
    unfilled: list[NodeId] = []
    for old in stale:
        taken = set(heads)
        strong = [i for i in sorted(eligible) if i not in taken and net[i].residual_energy >= threshold]
        pool = strong
        if not pool and old not in eligible:
            pool = [i for i in sorted(eligible) if i not in taken]
        idx = heads.index(old)
        if pool:
            heads[idx] = _elect_slots(net, pool, 1, rng)[0]
        elif old in eligible:
            log.debug("no replacement above %.3g J for head %d; keeping it", threshold, old)
            unfilled.append(old)
        else:
            log.debug("head %d left and no candidate remains; slot dropped", old)
            heads[idx] = -1
            unfilled.append(old)
    final = tuple(h for h in heads if h != -1)
    return ClusterAssignment(final, attach_members(net, final), current.epoch + 1, tuple(unfilled))
