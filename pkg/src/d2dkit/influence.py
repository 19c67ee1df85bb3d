"""First-reception sharing forests and per-group seed selection."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graphing import EncounterGraph, Group
from .trace import Trace, as_trace

EXHAUSTIVE_LIMIT = 20


class Strategy(str, enum.Enum):
    TREE_ROOT = "tree_root"
    MAX_DEGREE = "max_degree"
    MAX_STRENGTH = "max_strength"
    RANDOM = "random"
    EXHAUSTIVE = "exhaustive"


@dataclass
class SharingForest:
    group_id: int
    parent: dict
    children: dict
    roots: list
    subtree_size: dict
    first_activity: dict = field(default_factory=dict)

    @property
    def members(self) -> list:
        return sorted(self.parent)

    def depth(self, u: int) -> int:
        d = 0
        while self.parent[u] is not None:
            u = self.parent[u]
            d += 1
        return d

    def root_of(self, u: int) -> int:
        while self.parent[u] is not None:
            u = self.parent[u]
        return u


@dataclass(frozen=True)
class SeedChoice:
    group_id: int
    seed: int
    strategy: str

    def to_dict(self) -> dict:
        return {"group_id": self.group_id, "seed": self.seed, "strategy": self.strategy}


def _members_of(group) -> np.ndarray:
    members = group.members if isinstance(group, Group) else group
    return np.unique(np.asarray(list(members) if not isinstance(members, np.ndarray) else members, dtype=np.int64))


def restrict(trace: Trace, members: np.ndarray) -> Trace:
    """Events with both endpoints in ``members``, canonically sorted."""
    keep = np.isin(trace.sender, members) & np.isin(trace.receiver, members)
    return trace.take(np.flatnonzero(keep)).sorted()


def build_sharing_forest(first_half_events, group, group_id: Optional[int] = None) -> SharingForest:
    """Parent of each user = sender of the event where the user first appears,
    provided it first appears as a receiver; otherwise the user is a root.
    """
    members = _members_of(group)
    gid = group.id if isinstance(group, Group) else (group_id if group_id is not None else int(members.min()))
    trace = restrict(as_trace(first_half_events), members)
    n_ev = len(trace)
    first_idx = np.full(members.size, n_ev, dtype=np.int64)
    if n_ev:
        s = np.searchsorted(members, trace.sender)
        r = np.searchsorted(members, trace.receiver)
        ev = np.arange(n_ev, dtype=np.int64)
        np.minimum.at(first_idx, s, ev)
        np.minimum.at(first_idx, r, ev)
    parent: dict = {}
    first_activity: dict = {}
    for k, u in enumerate(members.tolist()):
        i = int(first_idx[k])
        if i == n_ev:
            parent[u] = None
            continue
        first_activity[u] = int(trace.ts[i])
        parent[u] = int(trace.sender[i]) if trace.receiver[i] == u else None

    # attachment order = first-appearance order, which also orders children
    order = sorted(members.tolist(), key=lambda u: (int(first_idx[np.searchsorted(members, u)]), u))
    children: dict = {u: [] for u in order}
    for u in order:
        p = parent[u]
        if p is not None:
            children[p].append(u)
    roots = [u for u in order if parent[u] is None]
    subtree = {u: 1 for u in order}
    # a child's first appearance never precedes its parent's
    for u in reversed(order):
        p = parent[u]
        if p is not None:
            subtree[p] += subtree[u]
    return SharingForest(gid, parent, children, roots, subtree, first_activity)


def select_seed(forest: SharingForest, strategy="tree_root", graph: Optional[EncounterGraph] = None,
                rng: Optional[np.random.Generator] = None, *, replay_events=None, params=None,
                tiers=None) -> SeedChoice:
    """Pick one seed user for the forest's group.

    ``max_degree``/``max_strength`` read ``graph`` (members absent from it
    count as degree 0); ``exhaustive`` needs ``replay_events`` and returns
    the member with the largest replay coverage. Ties go to the smallest id.
    """
    strategy = Strategy(strategy)
    members = forest.members
    if not members:
        raise ValueError("empty group")
    if len(members) == 1:
        return SeedChoice(forest.group_id, members[0], strategy.value)

    if strategy is Strategy.TREE_ROOT:
        inf = float("inf")
        seed = min(forest.roots, key=lambda u: (-forest.subtree_size[u], forest.first_activity.get(u, inf), u))
    elif strategy in (Strategy.MAX_DEGREE, Strategy.MAX_STRENGTH):
        if graph is None:
            raise ValueError(f"{strategy.value} needs an encounter graph")
        values = graph.degree() if strategy is Strategy.MAX_DEGREE else graph.strength()
        idx = np.searchsorted(graph.nodes, members)
        found = (idx < graph.num_nodes) & (graph.nodes[np.minimum(idx, graph.num_nodes - 1)] == members)
        score = np.where(found, values[np.minimum(idx, graph.num_nodes - 1)], 0)
        seed = members[int(np.argmax(score))]  # argmax returns the first, i.e. smallest id
    elif strategy is Strategy.RANDOM:
        rng = rng if rng is not None else np.random.default_rng()
        seed = members[int(rng.integers(0, len(members)))]
    else:
        if len(members) > EXHAUSTIVE_LIMIT:
            raise ValueError(f"exhaustive seeding is limited to groups of <= {EXHAUSTIVE_LIMIT} members")
        if replay_events is None:
            raise ValueError("exhaustive seeding needs the replay events")
        from .cascade import GroupReplay

        replay = GroupReplay(replay_events, members, forest.group_id, params, tiers)
        cov = [replay.run(u).coverage for u in members]
        seed = members[int(np.argmax(cov))]
    return SeedChoice(forest.group_id, int(seed), strategy.value)
