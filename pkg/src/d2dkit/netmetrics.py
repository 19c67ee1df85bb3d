"""Clustering, path-length and diameter metrics per group; power-law fits."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from . import kernels
from .graphing import EncounterGraph, Group, GroupPartition, _csr_from_pairs

# exact all-pairs BFS up to this many members, sampled sources beyond
EXACT_BFS_LIMIT = 100_000
SAMPLED_SOURCES = 256


class DisconnectedGroupError(ValueError):
    pass


@dataclass
class GroupMetrics:
    group_id: int
    size: int
    global_clustering: float
    mean_local_clustering: float
    avg_path_length: Optional[float]
    diameter: int
    diameter_is_lower_bound: bool = False

    def as_row(self) -> dict:
        return asdict(self)


@dataclass
class PowerLawFit:
    alpha_hat: float
    xmin: int
    n_tail: int
    ks_stat: float
    method: str = "discrete"

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# clustering


def local_clustering(graph: EncounterGraph, node: int) -> float:
    i = graph.index_of(node)
    indptr, indices = graph.csr()
    deg = int(indptr[i + 1] - indptr[i])
    if deg < 2:
        return 0.0
    nbrs = indices[indptr[i]:indptr[i + 1]]
    mask = np.zeros(graph.num_nodes, dtype=bool)
    mask[nbrs] = True
    links = sum(int(mask[indices[indptr[u]:indptr[u + 1]]].sum()) for u in nbrs.tolist()) // 2
    return 2.0 * links / (deg * (deg - 1))


def local_clustering_all(graph: EncounterGraph) -> np.ndarray:
    indptr, indices = graph.csr()
    tri = kernels.triangles_per_node(indptr, indices)
    deg = np.diff(indptr)
    pairs = deg * (deg - 1)
    out = np.zeros(graph.num_nodes, dtype=np.float64)
    ok = deg >= 2
    out[ok] = 2.0 * tri[ok] / pairs[ok]
    return out


def _transitivity(tri: np.ndarray, deg: np.ndarray) -> float:
    # sum of per-node triangles is 3T; connected triples are sum C(deg, 2)
    triples = int((deg * (deg - 1) // 2).sum())
    return 0.0 if triples == 0 else float(tri.sum()) / triples


def global_clustering(graph: EncounterGraph) -> float:
    indptr, indices = graph.csr()
    return _transitivity(kernels.triangles_per_node(indptr, indices), np.diff(indptr))


# --------------------------------------------------------------------------
# paths


def _path_stats_csr(indptr, indices, sources=None, rng=None):
    n = indptr.size - 1
    if n < 2:
        return None, 0, False
    sampled = sources is None and n > EXACT_BFS_LIMIT
    if sources is None:
        if sampled:
            rng = rng if rng is not None else np.random.default_rng(0)
            sources = np.sort(rng.choice(n, size=SAMPLED_SOURCES, replace=False))
        else:
            sources = np.arange(n, dtype=np.int64)
    total, diam, reached = kernels.bfs_stats(indptr, indices, np.asarray(sources, dtype=np.int64))
    if reached < n:
        raise DisconnectedGroupError("group is not connected")
    return total / (len(sources) * (n - 1)), int(diam), sampled


def path_stats(graph: EncounterGraph, group) -> tuple[Optional[float], int]:
    """(average shortest-path length over ordered pairs, diameter) of a connected group.

    ``group`` is a :class:`Group` or an iterable of member ids. A single
    member yields ``(None, 0)``.
    """
    members = group.members if isinstance(group, Group) else group
    _, indptr, indices = graph.subgraph(members)
    avg, diam, _ = _path_stats_csr(indptr, indices)
    return avg, diam


def _group_csrs(graph: EncounterGraph, partition: GroupPartition):
    """Yield (group, local indptr, local indices, node index array) per group."""
    labels = _labels_for(graph, partition)
    order = np.argsort(labels, kind="stable")
    node_bounds = np.searchsorted(labels[order], np.arange(len(partition.groups) + 1))
    local = np.empty(graph.num_nodes, dtype=np.int64)
    for gi in range(len(partition.groups)):
        seg = order[node_bounds[gi]:node_bounds[gi + 1]]
        local[seg] = np.arange(seg.size)
    e_lab = labels[graph.src]
    e_order = np.argsort(e_lab, kind="stable")
    edge_bounds = np.searchsorted(e_lab[e_order], np.arange(len(partition.groups) + 1))
    for gi, g in enumerate(partition.groups):
        seg = order[node_bounds[gi]:node_bounds[gi + 1]]
        es = e_order[edge_bounds[gi]:edge_bounds[gi + 1]]
        indptr, indices = _csr_from_pairs(seg.size, local[graph.src[es]], local[graph.dst[es]])
        yield g, indptr, indices, seg


def _labels_for(graph: EncounterGraph, partition: GroupPartition) -> np.ndarray:
    if partition.labels is not None and partition.labels.size == graph.num_nodes:
        return partition.labels
    gid_index = {g.id: i for i, g in enumerate(partition.groups)}
    return np.array([gid_index[partition.group_of[u]] for u in graph.nodes.tolist()], dtype=np.int64)


def group_metrics(graph: EncounterGraph, partition: GroupPartition, threads: int = 1,
                  rng_seed: int = 0) -> list[GroupMetrics]:
    """Metrics for every group, ordered by group id."""
    indptr, indices = graph.csr()
    tri = kernels.triangles_per_node(indptr, indices)
    deg = np.diff(indptr)
    lcc = np.zeros(graph.num_nodes)
    ok = deg >= 2
    lcc[ok] = 2.0 * tri[ok] / (deg[ok] * (deg[ok] - 1))

    def one(item):
        g, gp, gi, seg = item
        # per-group substream keeps sampled BFS independent of scheduling
        avg, diam, lower = _path_stats_csr(gp, gi, rng=np.random.default_rng([rng_seed, g.id]))
        return GroupMetrics(
            group_id=g.id,
            size=g.size,
            global_clustering=_transitivity(tri[seg], deg[seg]),
            mean_local_clustering=float(lcc[seg].mean()) if seg.size else 0.0,
            avg_path_length=avg,
            diameter=diam,
            diameter_is_lower_bound=lower,
        )

    items = _group_csrs(graph, partition)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, items))
    else:
        out = [one(it) for it in items]
    return sorted(out, key=lambda m: m.group_id)


# --------------------------------------------------------------------------
# power-law fitting


def _tail(sizes, xmin: int) -> np.ndarray:
    x = np.asarray(sizes, dtype=np.float64)
    x = x[x >= xmin]
    if x.size < 2:
        raise ValueError(f"need at least 2 samples >= xmin={xmin}, got {x.size}")
    return x


def _ks_discrete(x: np.ndarray, alpha: float, xmin: int) -> float:
    vals, counts = np.unique(x, return_counts=True)
    emp = np.cumsum(counts) / x.size
    fit = 1.0 - zeta(alpha, vals + 1.0) / zeta(alpha, xmin)
    # compare just below each support point too
    emp_prev = np.concatenate([[0.0], emp[:-1]])
    fit_prev = 1.0 - zeta(alpha, vals) / zeta(alpha, xmin)
    return float(min(1.0, max(np.abs(emp - fit).max(), np.abs(emp_prev - fit_prev).max())))


def fit_powerlaw_mle(sizes, xmin: int = 2, method: str = "discrete") -> PowerLawFit:
    """Fit P(k) ~ k**-alpha on the tail ``k >= xmin``.

    ``method="discrete"`` maximises the exact discrete likelihood
    (Hurwitz-zeta normaliser). ``method="approx"`` is the closed form
    ``1 + n / sum(ln(x / (xmin - 1/2)))``, which is biased for small xmin.
    """
    x = _tail(sizes, xmin)
    n = x.size
    s = float(np.log(x / (xmin - 0.5)).sum())
    approx = math.inf if s == 0 else 1.0 + n / s
    if method == "approx":
        alpha = approx
    elif method == "discrete":
        log_sum = float(np.log(x).sum())

        def nll(a):
            return n * math.log(zeta(a, xmin)) + a * log_sum

        res = minimize_scalar(nll, bounds=(1.0 + 1e-9, 60.0), method="bounded",
                              options={"xatol": 1e-10})
        alpha = float(res.x)
    else:
        raise ValueError(f"unknown method {method!r}")
    ks = _ks_discrete(x, alpha, xmin) if math.isfinite(alpha) else 1.0
    return PowerLawFit(float(alpha), int(xmin), int(n), ks, method)


def fit_powerlaw_scan(sizes, min_tail: int = 10, method: str = "discrete") -> PowerLawFit:
    """Choose xmin by minimising the KS distance over candidate values."""
    x = np.asarray(sizes, dtype=np.float64)
    best = None
    for xm in np.unique(x).astype(int).tolist():
        if xm < 1 or (x >= xm).sum() < min_tail:
            continue
        fit = fit_powerlaw_mle(x, xm, method)
        if best is None or fit.ks_stat < best.ks_stat:
            best = fit
    if best is None:
        raise ValueError("no candidate xmin leaves enough tail samples")
    return best


def sizes_from_histogram(hist: dict) -> np.ndarray:
    keys = sorted(hist)
    return np.repeat(np.asarray(keys, dtype=np.int64), [hist[k] for k in keys])
