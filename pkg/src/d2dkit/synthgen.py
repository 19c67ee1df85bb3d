"""Deterministic synthetic D2D sharing traces with a ground-truth ledger.

Model: power-law group sizes; inside each group a small-world contact
topology (ring lattice with rewiring); every topology edge carries a Poisson
number of sharing events whose rate grows with the endpoints' activity
weights; content is Zipf-popular inside a per-category catalog slice.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.special import zeta

from .trace import CATEGORIES, RelationshipTier, Tier, Trace

WEEK = 604800
DAY = 86400
START_TS = 1470009600  # 2016-08-01T00:00:00Z

DEFAULT_CATEGORY_MIX = {"app": 0.35, "video": 0.30, "music": 0.15, "image": 0.15, "other": 0.05}
DEFAULT_TIER_MIX = {"stranger": 0.5, "friend": 0.35, "family": 0.15}
# median file size per category, bytes
CATEGORY_MEDIAN_BYTES = {"app": 20e6, "video": 80e6, "music": 5e6, "image": 1.5e6, "other": 0.5e6}
# tabulated exact inverse CDF up to this size, continuous tail beyond
_PMF_TABLE = 1 << 14


@dataclass
class GeneratorConfig:
    rng_seed: int = 7
    num_groups: int = 2000
    size_alpha: float = 2.5
    size_xmin: int = 2
    weeks: int = 13
    events_per_user_week: float = 0.4
    catalog_size: int = 50000
    zipf_s: float = 1.0
    category_mix: dict = field(default_factory=lambda: dict(DEFAULT_CATEGORY_MIX))
    intra_group_topology: str = "ring_lattice_rewire"
    rewire_prob: float = 0.15
    mean_degree: int = 4
    tier_mix: dict = field(default_factory=lambda: dict(DEFAULT_TIER_MIX))
    gps_cell_deg: float = 0.01
    gps_rate: float = 0.2
    activity_sigma: float = 1.0
    lifetime_scale: float = 2.0
    adoption_lag_days: float = 7.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.size_alpha <= 1:
            raise ValueError("size_alpha must exceed 1")
        if self.size_xmin < 1:
            raise ValueError("size_xmin must be >= 1")
        if self.num_groups < 1 or self.weeks < 1 or self.catalog_size < 1:
            raise ValueError("num_groups, weeks and catalog_size must be positive")
        if self.events_per_user_week <= 0 or self.zipf_s <= 0:
            raise ValueError("events_per_user_week and zipf_s must be positive")
        if self.mean_degree < 2 or self.mean_degree % 2:
            raise ValueError("mean_degree must be an even integer >= 2")
        if self.lifetime_scale < 0 or self.adoption_lag_days < 0:
            raise ValueError("lifetime_scale and adoption_lag_days must be non-negative")
        for name in ("rewire_prob", "gps_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.activity_sigma < 0:
            raise ValueError("activity_sigma must be non-negative")
        if self.intra_group_topology != "ring_lattice_rewire":
            raise ValueError(f"unknown topology {self.intra_group_topology!r}")
        for name, mix, keys in (("category_mix", self.category_mix, CATEGORIES),
                                ("tier_mix", self.tier_mix, ("stranger", "friend", "family"))):
            unknown = set(mix) - set(keys)
            if unknown:
                raise ValueError(f"{name}: unknown keys {sorted(unknown)}")
            if any(v < 0 for v in mix.values()) or abs(sum(mix.values()) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be non-negative and sum to 1")

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown generator config fields: {sorted(extra)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class GroundTruthLedger:
    group_of: dict
    group_sizes: list
    tiers: list
    home_cell: dict
    event_count: int

    def to_dict(self) -> dict:
        return {
            "event_count": self.event_count,
            "group_sizes": list(self.group_sizes),
            "group_of": {str(u): g for u, g in sorted(self.group_of.items())},
            "home_cell": {str(g): [p[0], p[1]] for g, p in sorted(self.home_cell.items())},
            "tiers": [[r.user_a, r.user_b, int(r.tier)] for r in self.tiers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthLedger":
        return cls(
            group_of={int(u): g for u, g in d["group_of"].items()},
            group_sizes=list(d["group_sizes"]),
            tiers=[RelationshipTier(a, b, Tier(t)) for a, b, t in d["tiers"]],
            home_cell={int(g): tuple(p) for g, p in d["home_cell"].items()},
            event_count=d["event_count"],
        )


# --------------------------------------------------------------------------
# group sizes


def sample_powerlaw_sizes(n: int, alpha: float, xmin: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. sizes from the discrete power law P(k) ~ k**-alpha, k >= xmin.

    Exact inverse-CDF sampling against Hurwitz-zeta normalised masses for
    k < xmin + 2**14; beyond that table the continuous approximation
    ``(k0 - 1/2) * (1 - u')**(-1/(alpha - 1))`` rounded to nearest is used.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if xmin < 1:
        raise ValueError("xmin must be >= 1")
    u = rng.random(n)
    ks = np.arange(xmin, xmin + _PMF_TABLE, dtype=np.float64)
    norm = zeta(alpha, xmin)
    cdf = np.cumsum(ks ** -alpha) / norm
    out = np.searchsorted(cdf, u, side="right").astype(np.int64) + xmin
    tail = out >= xmin + _PMF_TABLE
    if tail.any():
        k0 = xmin + _PMF_TABLE
        p_tail = 1.0 - cdf[-1]
        rest = (1.0 - u[tail]) / p_tail
        cont = (k0 - 0.5) * np.clip(rest, 1e-300, 1.0) ** (-1.0 / (alpha - 1.0))
        out[tail] = np.maximum(np.floor(cont + 0.5), k0).astype(np.int64)
    return out


# --------------------------------------------------------------------------
# topology


def ring_lattice_rewire(n: int, k: int, p: float, rng: np.random.Generator, max_tries: int = 50) -> np.ndarray:
    """Connected small-world edge list (u < v) over ``range(n)``.

    Watts-Strogatz rewiring of a ring lattice with ``k`` neighbours; a
    rewired graph that came out disconnected is redrawn. Groups with
    ``n <= k`` get the complete graph.
    """
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if n <= k + 1:
        iu = np.triu_indices(n, 1)
        return np.stack(iu, axis=1).astype(np.int64)
    base = [(i, (i + j) % n) for j in range(1, k // 2 + 1) for i in range(n)]
    for _ in range(max_tries):
        adj = [set() for _ in range(n)]
        for a, b in base:
            adj[a].add(b)
            adj[b].add(a)
        draws = rng.random(len(base))
        targets = rng.integers(0, n, size=len(base))
        for (a, b), r, t in zip(base, draws, targets):
            if r >= p:
                continue
            t = int(t)
            if t == a or t in adj[a]:
                # resample once among free targets; otherwise keep the edge
                free = [x for x in range(n) if x != a and x not in adj[a]]
                if not free:
                    continue
                t = free[int(rng.integers(0, len(free)))]
            adj[a].discard(b)
            adj[b].discard(a)
            adj[a].add(t)
            adj[t].add(a)
        if _connected(adj):
            break
    else:
        adj = [set() for _ in range(n)]
        for a, b in base:
            adj[a].add(b)
            adj[b].add(a)
    edges = sorted((a, b) for a in range(n) for b in adj[a] if a < b)
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _connected(adj) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adj)


# --------------------------------------------------------------------------
# content catalog


class _Catalog:
    """Equal-sized catalog slice per category, Zipf popularity inside each."""

    def __init__(self, size: int, zipf_s: float, rng: np.random.Generator):
        ncat = len(CATEGORIES)
        per = max(1, size // ncat)
        self.offset = np.arange(ncat, dtype=np.int64) * per
        ranks = np.arange(1, per + 1, dtype=np.float64)
        w = ranks ** -zipf_s
        self.cdf = np.cumsum(w) / w.sum()
        self.per = per
        # one fixed size per file so repeat deliveries carry identical bytes
        medians = np.array([CATEGORY_MEDIAN_BYTES[c] for c in CATEGORIES])
        self.file_size = np.rint(
            np.repeat(medians, per) * rng.lognormal(0.0, 0.5, size=per * ncat)
        ).astype(np.int64)
        self.permutation = np.stack([rng.permutation(per) for _ in range(ncat)])

    def draw(self, cats: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        rank = np.minimum(np.searchsorted(self.cdf, rng.random(cats.size), side="right"), self.per - 1)
        # popular ranks land on scattered ids inside the slice
        return self.offset[cats] + self.permutation[cats, rank]


# --------------------------------------------------------------------------
# generation


def _lifecycle(edges, activity, span, config, rng):
    """Per-user (join, leave, recruiter); offsets in seconds from the trace start.

    The most active member founds the group at t=0; everyone else adopts
    after a first-passage delay through the contact topology (exponential
    per-edge lags) and ``recruiter`` names the neighbour they adopted
    from (-1 for the founder or when adoption is off). Users then stay for ``lifetime_scale * span * activity *
    Exp(1)``, so engaged users persist. Zero knobs give [0, span) for all.
    """
    n = activity.size
    join = np.zeros(n, dtype=np.int64)
    recruiter = np.full(n, -1, dtype=np.int64)
    if config.adoption_lag_days > 0:
        founder = int(np.argmax(activity))
        lag = rng.exponential(config.adoption_lag_days * DAY, size=len(edges))
        adj = sp.csr_matrix((lag + 1.0, (edges[:, 0], edges[:, 1])), shape=(n, n))
        dist, pred = dijkstra(adj, directed=False, indices=founder, return_predecessors=True)
        join = np.minimum(np.floor(dist), span - DAY).astype(np.int64)
        recruiter = np.where(pred >= 0, pred, -1).astype(np.int64)
    if config.lifetime_scale > 0:
        life = np.floor(span * config.lifetime_scale * activity * rng.exponential(1.0, size=n))
        leave = np.minimum(join + life.astype(np.int64), span)
    else:
        leave = np.full(n, span, dtype=np.int64)
    return join, np.maximum(leave, join + 1), recruiter


def _group_rng(seed: int, gid: int) -> np.random.Generator:
    return np.random.default_rng([seed, gid, 0x5EED])


def _mix_arrays(mix: dict, keys) -> np.ndarray:
    return np.array([mix.get(k, 0.0) for k in keys], dtype=np.float64)


def generate_trace(config: GeneratorConfig, *, size_override=None) -> tuple[Trace, GroundTruthLedger]:
    """Generate ``(trace, ledger)``; the trace is canonically sorted.

    ``size_override`` replaces the sampled group sizes (used for degenerate
    cases such as a single singleton group).
    """
    config.validate()
    root = np.random.default_rng(config.rng_seed)
    if size_override is not None:
        sizes = np.asarray(size_override, dtype=np.int64)
    else:
        sizes = sample_powerlaw_sizes(config.num_groups, config.size_alpha, config.size_xmin, root)
    catalog = _Catalog(config.catalog_size, config.zipf_s, root)
    cat_p = _mix_arrays(config.category_mix, CATEGORIES)
    tier_p = _mix_arrays(config.tier_mix, ("stranger", "friend", "family"))
    min_ts = START_TS
    max_ts = START_TS + config.weeks * WEEK
    span = max_ts - min_ts

    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    group_of: dict = {}
    home_cell: dict = {}
    tiers: list = []
    chunks = []
    for g, (size, off) in enumerate(zip(sizes.tolist(), offsets.tolist())):
        gid = off  # group id = smallest member id
        for u in range(off, off + size):
            group_of[u] = gid
        rng = _group_rng(config.rng_seed, g)
        lat0 = float(rng.uniform(-60.0, 60.0))
        lon0 = float(rng.uniform(-180.0, 180.0))
        home_cell[gid] = (round(lat0, 6), round(lon0, 6))
        edges = ring_lattice_rewire(size, config.mean_degree, config.rewire_prob, rng)
        if len(edges) == 0:
            continue
        activity = rng.lognormal(0.0, config.activity_sigma, size=size)
        join, leave, recruiter = _lifecycle(edges, activity, span, config, rng)
        edge_start = np.maximum(join[edges[:, 0]], join[edges[:, 1]])
        edge_end = np.minimum(leave[edges[:, 0]], leave[edges[:, 1]])
        # an edge always keeps at least a day-long window for its forced event
        edge_end = np.minimum(np.maximum(edge_end, edge_start + DAY), span)
        edge_start = np.minimum(edge_start, edge_end - 1)
        window = edge_end - edge_start
        w_edge = activity[edges[:, 0]] + activity[edges[:, 1]]
        expected_total = config.events_per_user_week * size * config.weeks
        rate = expected_total * w_edge / w_edge.sum() * (window / span)
        counts = rng.poisson(rate)
        counts[counts == 0] = 1  # every topology edge is observed at least once
        tier_codes = rng.choice(3, size=len(edges), p=tier_p)
        for (a, b), t in zip(edges.tolist(), tier_codes.tolist()):
            if t:
                tiers.append(RelationshipTier(a + off, b + off, Tier(t)))
        e_idx = np.repeat(np.arange(len(edges)), counts)
        m = e_idx.size
        ea = edges[e_idx, 0]
        eb = edges[e_idx, 1]
        p_a = activity[ea] / (activity[ea] + activity[eb])
        a_sends = rng.random(m) < p_a
        snd = np.where(a_sends, ea, eb)
        rcv = np.where(a_sends, eb, ea)
        ts = min_ts + edge_start[e_idx] + np.floor(rng.random(m) * window[e_idx]).astype(np.int64)
        # each adopter's join is the moment its recruiter first shares with it
        adopted = np.flatnonzero(recruiter >= 0)
        if adopted.size:
            snd = np.concatenate([snd, recruiter[adopted]])
            rcv = np.concatenate([rcv, adopted])
            ts = np.concatenate([ts, min_ts + join[adopted]])
            m = ts.size
        snd = snd + off
        rcv = rcv + off
        cats = rng.choice(len(CATEGORIES), size=m, p=cat_p).astype(np.int8)
        files = catalog.draw(cats.astype(np.int64), rng)
        has_geo = rng.random(m) < config.gps_rate
        noise = rng.normal(0.0, config.gps_cell_deg / 2.0, size=(m, 2))
        lat = np.where(has_geo, np.round(np.clip(lat0 + noise[:, 0], -90.0, 90.0), 6), np.nan)
        lon = np.where(has_geo, np.round(np.clip(lon0 + noise[:, 1], -180.0, 180.0), 6), np.nan)
        chunks.append((ts, snd, rcv, files, catalog.file_size[files], cats, lat, lon))

    if chunks:
        cols = [np.concatenate(c) for c in zip(*chunks)]
        trace = Trace(*cols, min_ts=min_ts, max_ts=max_ts).sorted()
    else:
        trace = Trace.empty(min_ts, max_ts)
    ledger = GroundTruthLedger(
        group_of=group_of,
        group_sizes=sizes.tolist(),
        tiers=sorted(tiers, key=lambda r: (r.user_a, r.user_b)),
        home_cell=home_cell,
        event_count=len(trace),
    )
    return trace, ledger
