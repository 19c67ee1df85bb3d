"""Pairwise features for nowcasting D2D sharings.

All features of a pair are computed from a single *feature window* trace,
so nothing from the label window can leak in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..graphing import build_encounter_graph, compute_groups, events_by_group
from ..influence import build_sharing_forest
from ..netmetrics import local_clustering_all
from ..trace import CATEGORIES, TierIndex, Trace, as_trace

COLUMNS = ("f1", "f2a", "f2b", "f2c", "f3a", "f3b", "f3c", "f4", "f4m",
           "f5a", "f5b", "f6a", "f6b", "f7")

FAMILIES = {
    "f1": ("f1",),
    "f2": ("f2a", "f2b", "f2c"),
    "f3": ("f3a", "f3b", "f3c"),
    "f4": ("f4", "f4m"),
    "f5": ("f5a", "f5b"),
    "f6": ("f6a", "f6b"),
    "f7": ("f7",),
}

FAMILY_NAMES = {
    "f1": "behavior_similarity",
    "f2": "preference_entropy",
    "f3": "meeting_dynamics",
    "f4": "trajectory_similarity",
    "f5": "group_characteristics",
    "f6": "social_arborescence",
    "f7": "permission_tier",
}

TREE_DISTANCE_CAP = 16


def columns_for(families) -> list:
    return [c for f in families for c in FAMILIES[f]]


def shannon_entropy(distribution) -> float:
    """Entropy in bits; zero-probability terms contribute nothing."""
    p = np.asarray(distribution, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("distribution has negative entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("distribution must sum to 1")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def gps_cell(lat: float, lon: float, cell_deg: float) -> tuple:
    return (math.floor(lat / cell_deg), math.floor(lon / cell_deg))


@dataclass
class FeatureVector:
    values: np.ndarray

    def __getitem__(self, name: str) -> float:
        return float(self.values[COLUMNS.index(name)])

    def as_dict(self) -> dict:
        return dict(zip(COLUMNS, self.values.tolist()))


class FeatureContext:
    """Per-user and per-pair aggregates of one feature window."""

    def __init__(self, window_events, tiers: Optional[TierIndex] = None, gps_cell_deg: float = 0.01,
                 window: Optional[tuple] = None):
        trace = as_trace(window_events).sorted()
        self.trace = trace
        self.tiers = tiers if tiers is not None else TierIndex()
        self.gps_cell_deg = gps_cell_deg
        if window is None:
            window = (int(trace.ts.min()), int(trace.ts.max()) + 1) if len(trace) else (0, 0)
        self.window = window
        self.users = trace.users()
        n = self.users.size
        s = np.searchsorted(self.users, trace.sender)
        r = np.searchsorted(self.users, trace.receiver)
        both = np.concatenate([s, r])
        hours = np.tile((trace.ts % 86400) // 3600, 2)
        cats = np.tile(trace.category.astype(np.int64), 2)
        self.hour_hist = np.zeros((n, 24))
        np.add.at(self.hour_hist, (both, hours), 1.0)
        self.cat_hist = np.zeros((n, len(CATEGORIES)))
        np.add.at(self.cat_hist, (both, cats), 1.0)

        # encounter timestamps per unordered pair
        lo = np.minimum(trace.sender, trace.receiver)
        hi = np.maximum(trace.sender, trace.receiver)
        order = np.lexsort((trace.ts, hi, lo))
        self._pair_lo, self._pair_hi, self._pair_ts = lo[order], hi[order], trace.ts[order]
        self._pair_key = self._pair_lo * (1 << 32) + self._pair_hi

        self.cells: dict = {}
        geo = np.flatnonzero(~np.isnan(trace.lat))
        for i in geo.tolist():
            c = gps_cell(trace.lat[i], trace.lon[i], gps_cell_deg)
            self.cells.setdefault(int(trace.sender[i]), set()).add(c)
            self.cells.setdefault(int(trace.receiver[i]), set()).add(c)

        self.graph = build_encounter_graph(trace)
        self.partition = compute_groups(self.graph)
        self.lcc = local_clustering_all(self.graph)
        sizes = {g.id: g.size for g in self.partition.groups}
        self.group_size = np.array([sizes[self.partition.group_of[u]] for u in self.users.tolist()])
        self.parent: dict = {}
        self.depth: dict = {}
        by_group = events_by_group(trace, self.partition, [g.id for g in self.partition.groups])
        for g in self.partition.groups:
            forest = build_sharing_forest(by_group[g.id], g)
            self.parent.update(forest.parent)
        for u in self.users.tolist():
            self.depth[u] = self._depth(u)

    def _depth(self, u: int) -> int:
        d = 0
        p = self.parent[u]
        while p is not None:
            d += 1
            p = self.parent[p]
        return d

    def index(self, u: int) -> int:
        i = int(np.searchsorted(self.users, u))
        if i >= self.users.size or self.users[i] != u:
            raise KeyError(f"user {u} is not active in the feature window")
        return i

    def encounter_times(self, u: int, v: int) -> np.ndarray:
        key = min(u, v) * (1 << 32) + max(u, v)
        lo, hi = np.searchsorted(self._pair_key, [key, key + 1])
        return self._pair_ts[lo:hi]

    def candidate_pairs(self) -> np.ndarray:
        """Unordered pairs with at least one encounter, sorted."""
        keys = np.unique(self._pair_key)
        return np.stack([keys >> 32, keys & ((1 << 32) - 1)], axis=1)

    def tree_relation(self, u: int, v: int) -> tuple:
        """(hop distance in the forest, depth of lowest common ancestor)."""
        anc_u = {}
        x, d = u, 0
        while x is not None:
            anc_u[x] = d
            x, d = self.parent[x], d + 1
        y, dv = v, 0
        while y is not None:
            if y in anc_u:
                return min(anc_u[y] + dv, TREE_DISTANCE_CAP), self.depth[y]
            y, dv = self.parent[y], dv + 1
        return TREE_DISTANCE_CAP, -1


def extract_features(ctx: FeatureContext, pair) -> FeatureVector:
    u, v = int(pair[0]), int(pair[1])
    iu, iv = ctx.index(u), ctx.index(v)
    f1 = cosine(ctx.hour_hist[iu], ctx.hour_hist[iv])
    pu = ctx.cat_hist[iu] / ctx.cat_hist[iu].sum()
    pv = ctx.cat_hist[iv] / ctx.cat_hist[iv].sum()
    f2a, f2b, f2c = shannon_entropy(pu), shannon_entropy(pv), cosine(pu, pv)

    ts = ctx.encounter_times(u, v)
    f3a = float(ts.size)
    if ts.size >= 2:
        gaps = np.diff(ts) / 3600.0
        f3b = float(gaps.mean())
        f3c = float(gaps.std() / f3b) if f3b > 0 else 0.0
    else:
        # a single (or no) encounter: gap censored at the window length
        f3b = (ctx.window[1] - ctx.window[0]) / 3600.0
        f3c = 0.0

    cu, cv = ctx.cells.get(u), ctx.cells.get(v)
    if cu and cv:
        f4, f4m = len(cu & cv) / len(cu | cv), 0.0
    else:
        f4, f4m = 0.0, 1.0

    # an encountering pair always shares a group
    f5a = math.log(ctx.group_size[iu])
    f5b = (ctx.lcc[ctx.graph.index_of(u)] + ctx.lcc[ctx.graph.index_of(v)]) / 2.0
    f6a, f6b = ctx.tree_relation(u, v)
    f7 = float(int(ctx.tiers.tier(u, v)))
    return FeatureVector(np.array([f1, f2a, f2b, f2c, f3a, f3b, f3c, f4, f4m, f5a, f5b,
                                   float(f6a), float(f6b), f7], dtype=np.float64))


def feature_matrix(ctx: FeatureContext, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.empty((len(pairs), len(COLUMNS)), dtype=np.float64)
    for k, (u, v) in enumerate(pairs.tolist()):
        out[k] = extract_features(ctx, (u, v)).values
    return out


def window_trace(trace: Trace, lo: int, hi: int) -> Trace:
    keep = (trace.ts >= lo) & (trace.ts < hi)
    return trace.take(np.flatnonzero(keep))
