"""Encounter graph construction and group partitioning."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .trace import Trace, as_trace


@dataclass(frozen=True)
class EdgeStats:
    event_count: int
    total_bytes: int
    first_ts: int
    last_ts: int


@dataclass
class EncounterGraph:
    """Undirected user graph.

    ``nodes`` is the sorted array of user ids. Edges are stored as index
    pairs into ``nodes`` with ``src < dst``, sorted lexicographically, with
    per-edge aggregates alongside.
    """

    nodes: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    event_count: np.ndarray
    total_bytes: np.ndarray
    first_ts: np.ndarray
    last_ts: np.ndarray
    _csr: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def num_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @classmethod
    def from_edges(cls, edges, nodes=None) -> "EncounterGraph":
        """Unit-count graph from (u, v) id pairs; handy for tests and oracles."""
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        ids = arr.ravel() if nodes is None else np.concatenate([arr.ravel(), np.asarray(list(nodes), dtype=np.int64)])
        node_ids = np.unique(ids)
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        if np.any(lo == hi):
            raise ValueError("self-loops are not allowed")
        pairs = np.unique(np.stack([lo, hi], axis=1), axis=0) if arr.size else arr
        n = len(pairs)
        zeros = np.zeros(n, dtype=np.int64)
        return cls(node_ids, np.searchsorted(node_ids, pairs[:, 0]), np.searchsorted(node_ids, pairs[:, 1]),
                   np.ones(n, dtype=np.int64), zeros, zeros.copy(), zeros.copy())

    def index_of(self, user: int) -> int:
        i = int(np.searchsorted(self.nodes, user))
        if i >= self.nodes.size or self.nodes[i] != user:
            raise KeyError(f"unknown node {user}")
        return i

    def edges(self) -> dict:
        """Mapping ``(u, v) -> EdgeStats`` keyed by user ids with ``u < v``."""
        u = self.nodes[self.src].tolist()
        v = self.nodes[self.dst].tolist()
        return {
            (a, b): EdgeStats(c, t, f, l)
            for a, b, c, t, f, l in zip(u, v, self.event_count.tolist(), self.total_bytes.tolist(),
                                        self.first_ts.tolist(), self.last_ts.tolist())
        }

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric adjacency as (indptr, indices) with sorted neighbour lists."""
        if self._csr is None:
            n = self.num_nodes
            rows = np.concatenate([self.src, self.dst])
            cols = np.concatenate([self.dst, self.src])
            order = np.lexsort((cols, rows))
            indices = cols[order].astype(np.int64)
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
            self._csr = (indptr, indices)
        return self._csr

    def degree(self) -> np.ndarray:
        indptr, _ = self.csr()
        return np.diff(indptr)

    def strength(self) -> np.ndarray:
        """Sum of incident edge event counts per node."""
        n = self.num_nodes
        return (np.bincount(self.src, weights=self.event_count, minlength=n)
                + np.bincount(self.dst, weights=self.event_count, minlength=n)).astype(np.int64)

    def neighbors(self, user: int) -> np.ndarray:
        indptr, indices = self.csr()
        i = self.index_of(user)
        return self.nodes[indices[indptr[i]:indptr[i + 1]]]

    def subgraph(self, members) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Induced subgraph on ``members`` as (member ids, local indptr, local indices)."""
        ids = np.unique(np.asarray(list(members) if not isinstance(members, np.ndarray) else members, dtype=np.int64))
        idx = np.searchsorted(self.nodes, ids)
        if np.any(idx >= self.nodes.size) or np.any(self.nodes[np.minimum(idx, self.nodes.size - 1)] != ids):
            raise KeyError("subgraph members must be graph nodes")
        local = np.full(self.num_nodes, -1, dtype=np.int64)
        local[idx] = np.arange(ids.size)
        keep = (local[self.src] >= 0) & (local[self.dst] >= 0)
        return (ids,) + _csr_from_pairs(ids.size, local[self.src[keep]], local[self.dst[keep]])


def _csr_from_pairs(n: int, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    order = np.lexsort((cols, rows))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols[order].astype(np.int64)


def build_encounter_graph(events) -> EncounterGraph:
    trace = as_trace(events)
    nodes = trace.users()
    if len(trace) == 0:
        e = np.zeros(0, dtype=np.int64)
        return EncounterGraph(nodes.astype(np.int64), e, e.copy(), e.copy(), e.copy(), e.copy(), e.copy())
    s = np.searchsorted(nodes, trace.sender)
    r = np.searchsorted(nodes, trace.receiver)
    lo = np.minimum(s, r)
    hi = np.maximum(s, r)
    key = lo * nodes.size + hi
    uniq, inv = np.unique(key, return_inverse=True)
    m = uniq.size
    count = np.bincount(inv, minlength=m).astype(np.int64)
    total = np.zeros(m, dtype=np.int64)
    np.add.at(total, inv, trace.size)
    first = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
    last = np.full(m, np.iinfo(np.int64).min, dtype=np.int64)
    np.minimum.at(first, inv, trace.ts)
    np.maximum.at(last, inv, trace.ts)
    return EncounterGraph(nodes.astype(np.int64), uniq // nodes.size, uniq % nodes.size,
                          count, total, first, last)


@dataclass
class Group:
    id: int
    members: np.ndarray

    @property
    def size(self) -> int:
        return int(self.members.size)


@dataclass
class GroupPartition:
    groups: list
    group_of: dict
    # per-node group index aligned with the graph's node array
    labels: Optional[np.ndarray] = None

    def by_id(self) -> dict:
        return {g.id: g for g in self.groups}

    def to_json_obj(self) -> dict:
        return {str(g.id): g.members.tolist() for g in self.groups}


def compute_groups(graph: EncounterGraph) -> GroupPartition:
    """Connected components by union-find; group id = smallest member id."""
    n = graph.num_nodes
    roots = kernels.component_labels(n, graph.src.astype(np.int64), graph.dst.astype(np.int64))
    # roots are component-minimum indices, and nodes are sorted, so the root's
    # user id is the smallest member id
    uniq, labels = np.unique(roots, return_inverse=True)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(uniq.size + 1))
    groups = []
    for gi in range(uniq.size):
        members = graph.nodes[order[bounds[gi]:bounds[gi + 1]]]
        groups.append(Group(int(graph.nodes[uniq[gi]]), members))
    group_ids = graph.nodes[uniq]
    group_of = dict(zip(graph.nodes.tolist(), group_ids[labels].tolist()))
    return GroupPartition(groups, group_of, labels.astype(np.int64))


def group_size_histogram(partition: GroupPartition) -> dict:
    return dict(sorted(Counter(g.size for g in partition.groups).items()))


def events_by_group(trace: Trace, partition: GroupPartition, group_ids: list) -> dict:
    """Map group id -> canonically sorted sub-trace (grouped by sender), in one pass."""
    users = np.array(sorted(partition.group_of), dtype=np.int64)
    gids = np.array([partition.group_of[u] for u in users.tolist()], dtype=np.int64)
    if len(trace) == 0 or users.size == 0:
        return {g: trace.take(slice(0, 0)) for g in group_ids}
    pos = np.minimum(np.searchsorted(users, trace.sender), users.size - 1)
    known = users[pos] == trace.sender
    ev_gid = np.where(known, gids[pos], -1)
    order = np.lexsort((trace.file, trace.receiver, trace.sender, trace.ts, ev_gid))
    sorted_gid = ev_gid[order]
    out = {}
    for g in group_ids:
        lo, hi = np.searchsorted(sorted_gid, [g, g + 1])
        out[g] = trace.take(order[lo:hi])
    return out
