"""Replay of content propagation over second-half encounters, and the
sampled-group coverage study built on it."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .graphing import Group, GroupPartition, build_encounter_graph, events_by_group
from .influence import Strategy, _members_of, build_sharing_forest, restrict, select_seed
from .trace import Tier, TierIndex, as_trace, split_by_time


@dataclass(frozen=True)
class CascadeParams:
    transmission_prob: float = 1.0
    permission_threshold: Tier = Tier.STRANGER
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.transmission_prob <= 1.0:
            raise ValueError("transmission_prob must lie in [0, 1]")
        object.__setattr__(self, "permission_threshold", Tier.parse(self.permission_threshold))


@dataclass
class PropagationOutcome:
    group_id: int
    seed: int
    infected: frozenset
    coverage: float
    coverage_encountered: float
    timeline: list = field(default_factory=list)
    size: int = 0


class GroupReplay:
    """Pre-indexed contacts of one group, replayable from any seed."""

    def __init__(self, events, group, group_id: Optional[int] = None, params: Optional[CascadeParams] = None,
                 tiers: Optional[TierIndex] = None, rng: Optional[np.random.Generator] = None):
        self.members = _members_of(group)
        self.group_id = group.id if isinstance(group, Group) else (
            group_id if group_id is not None else int(self.members.min()))
        self.params = params or CascadeParams()
        self.trace = restrict(as_trace(events), self.members)
        self.a = np.searchsorted(self.members, self.trace.sender).astype(np.int64)
        self.b = np.searchsorted(self.members, self.trace.receiver).astype(np.int64)
        m = len(self.trace)
        threshold = self.params.permission_threshold
        if threshold > Tier.STRANGER:
            if tiers is None:
                self.allowed = np.zeros(m, dtype=bool)
            else:
                self.allowed = tiers.tiers_for(self.trace.sender, self.trace.receiver) >= int(threshold)
        else:
            self.allowed = np.ones(m, dtype=bool)
        p = self.params.transmission_prob
        if p < 1.0:
            # one uniform per contact in processing order: common random numbers across p
            rng = rng if rng is not None else np.random.default_rng([self.params.rng_seed, self.group_id])
            self.draws = rng.random(m)
        else:
            self.draws = np.zeros(0, dtype=np.float64)
        active = np.zeros(self.members.size, dtype=bool)
        active[self.a] = True
        active[self.b] = True
        self._active = active

    def run(self, seed: int) -> PropagationOutcome:
        k = int(np.searchsorted(self.members, seed))
        if k >= self.members.size or self.members[k] != seed:
            raise ValueError(f"seed {seed} is not a member of group {self.group_id}")
        infected, idx, src, dst = kernels.replay(self.a, self.b, self.allowed, self.draws,
                                                 float(self.params.transmission_prob), k, int(self.members.size))
        n = self.members.size
        hit = int(infected.sum())
        reachable = self._active.copy()
        reachable[k] = True
        timeline = list(zip(self.trace.ts[idx].tolist(), self.members[src].tolist(), self.members[dst].tolist()))
        return PropagationOutcome(
            group_id=self.group_id,
            seed=int(seed),
            infected=frozenset(self.members[infected].tolist()),
            coverage=hit / n,
            coverage_encountered=hit / int(reachable.sum()),
            timeline=timeline,
            size=int(n),
        )


def replay_propagation(second_half_events, group, seed: int, params: Optional[CascadeParams] = None,
                       tiers: Optional[TierIndex] = None, rng: Optional[np.random.Generator] = None) -> PropagationOutcome:
    """Replay one seed's content over the group's contacts in time order."""
    return GroupReplay(second_half_events, group, params=params, tiers=tiers, rng=rng).run(seed)


@dataclass
class CoverageStudy:
    outcomes: list
    mean: float
    median: float
    cdf: list
    mean_encountered: float
    strategy: str = ""

    def rows(self) -> list:
        return [
            {"group_id": o.group_id, "size": o.size, "seed": o.seed,
             "coverage": o.coverage, "coverage_encountered": o.coverage_encountered}
            for o in self.outcomes
        ]

    def summary(self) -> dict:
        return {"strategy": self.strategy, "n_groups": len(self.outcomes), "mean": self.mean,
                "median": self.median, "mean_encountered": self.mean_encountered,
                "cdf": [list(p) for p in self.cdf]}


class TooFewGroupsError(ValueError):
    pass


def evaluate_coverage(trace, partition: GroupPartition, strategy="tree_root",
                      params: Optional[CascadeParams] = None, sample_size: int = 100,
                      min_group_size: int = 5, rng_seed: int = 0, tiers: Optional[TierIndex] = None,
                      threads: int = 1, split_fraction: float = 0.5) -> CoverageStudy:
    """Sample groups, seed them from the first half, replay the second half."""
    params = params or CascadeParams()
    strategy = Strategy(strategy)
    trace = as_trace(trace)
    eligible = sorted((g for g in partition.groups if g.size >= min_group_size), key=lambda g: g.id)
    if len(eligible) < sample_size:
        raise TooFewGroupsError(
            f"only {len(eligible)} groups have >= {min_group_size} members; need {sample_size}")
    rng = np.random.default_rng(rng_seed)
    picked = sorted(rng.choice(len(eligible), size=sample_size, replace=False).tolist())
    groups = [eligible[i] for i in picked]
    first, second = split_by_time(trace, fraction=split_fraction)
    ids = [g.id for g in groups]
    first_by = events_by_group(first, partition, ids)
    second_by = events_by_group(second, partition, ids)
    graph = build_encounter_graph(first) if strategy in (Strategy.MAX_DEGREE, Strategy.MAX_STRENGTH) else None

    def one(g: Group) -> PropagationOutcome:
        forest = build_sharing_forest(first_by[g.id], g)
        seed_rng = np.random.default_rng([rng_seed, 1, g.id])
        choice = select_seed(forest, strategy, graph, seed_rng, replay_events=second_by[g.id],
                             params=params, tiers=tiers)
        return GroupReplay(second_by[g.id], g, params=params, tiers=tiers).run(choice.seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, groups))
    else:
        outcomes = [one(g) for g in groups]
    return summarize_outcomes(outcomes, strategy.value)


def summarize_outcomes(outcomes: list, strategy: str = "") -> CoverageStudy:
    cov = np.array([o.coverage for o in outcomes], dtype=np.float64)
    enc = np.array([o.coverage_encountered for o in outcomes], dtype=np.float64)
    xs = np.sort(cov)
    cdf = [(float(x), (i + 1) / xs.size) for i, x in enumerate(xs.tolist())]
    return CoverageStudy(outcomes, float(cov.mean()), float(np.median(cov)), cdf, float(enc.mean()), strategy)
