"""Hot loops: union-find labelling, all-pairs BFS, triangle counts, replay.

Each kernel exists twice: a numba ``_nb`` version and a numpy ``_np``
version with identical outputs. The public names bind to one of them
according to :data:`d2dkit._accel.USE_NUMBA`.
"""

import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# connected components


@njit
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit
def component_labels_nb(n, src, dst):
    parent = np.arange(n)
    for i in range(src.shape[0]):
        ra = _uf_find(parent, src[i])
        rb = _uf_find(parent, dst[i])
        if ra != rb:
            # smaller index wins so the root is the component minimum
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = _uf_find(parent, i)
    return labels


def component_labels_np(n, src, dst):
    labels = np.arange(n, dtype=np.int64)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.size == 0:
        return labels
    while True:
        m = np.minimum(labels[src], labels[dst])
        before = labels.copy()
        np.minimum.at(labels, labels[src], m)
        np.minimum.at(labels, labels[dst], m)
        while True:
            jumped = labels[labels]
            if np.array_equal(jumped, labels):
                break
            labels = jumped
        if np.array_equal(before, labels):
            return labels


# --------------------------------------------------------------------------
# all-pairs BFS


@njit
def bfs_stats_nb(indptr, indices, sources):
    """Return (sum of distances, max distance, min reached count) over sources."""
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    total = 0
    diam = 0
    min_reached = n
    for s in sources:
        dist[:] = -1
        dist[s] = 0
        head = 0
        tail = 1
        queue[0] = s
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[v] + 1
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dv
                    queue[tail] = w
                    tail += 1
                    total += dv
                    if dv > diam:
                        diam = dv
        if tail < min_reached:
            min_reached = tail
    return total, diam, min_reached


def bfs_stats_np(indptr, indices, sources, chunk=256):
    n = len(indptr) - 1
    sources = np.asarray(sources, dtype=np.int64)
    if n == 0 or sources.size == 0:
        return 0, 0, n
    adj = sp.csr_matrix((np.ones(len(indices), dtype=np.float32), indices, indptr), shape=(n, n))
    total = 0
    diam = 0
    min_reached = n
    for start in range(0, sources.size, chunk):
        block = sources[start:start + chunk]
        k = block.size
        visited = np.zeros((n, k), dtype=bool)
        visited[block, np.arange(k)] = True
        frontier = visited.astype(np.float32)
        depth = 0
        while True:
            depth += 1
            nxt = (adj @ frontier) > 0
            nxt &= ~visited
            hits = int(nxt.sum())
            if hits == 0:
                break
            total += depth * hits
            diam = max(diam, depth)
            visited |= nxt
            frontier = nxt.astype(np.float32)
        min_reached = min(min_reached, int(visited.sum(axis=0).min()))
    return total, diam, min_reached


# --------------------------------------------------------------------------
# triangles


@njit
def triangles_per_node_nb(indptr, indices):
    n = indptr.shape[0] - 1
    mark = np.zeros(n, dtype=np.bool_)
    tri = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for k in range(indptr[v], indptr[v + 1]):
            mark[indices[k]] = True
        c = 0
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            for j in range(indptr[u], indptr[u + 1]):
                if mark[indices[j]]:
                    c += 1
        tri[v] = c // 2
        for k in range(indptr[v], indptr[v + 1]):
            mark[indices[k]] = False
    return tri


def triangles_per_node_np(indptr, indices):
    n = len(indptr) - 1
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = sp.csr_matrix((np.ones(len(indices), dtype=np.int64), indices, indptr), shape=(n, n))
    closed = (adj @ adj).multiply(adj)
    return (np.asarray(closed.sum(axis=1)).ravel() // 2).astype(np.int64)


# --------------------------------------------------------------------------
# propagation replay


@njit
def replay_nb(a, b, allowed, draws, prob, seed, n):
    """Monotone replay over time-ordered contacts (a[i], b[i]).

    ``draws`` holds one uniform per contact or is empty (every allowed
    contact transmits). Returns infected mask and the timeline as
    (contact index, from, to) arrays.
    """
    infected = np.zeros(n, dtype=np.bool_)
    infected[seed] = True
    m = a.shape[0]
    tl_idx = np.empty(n, dtype=np.int64)
    tl_from = np.empty(n, dtype=np.int64)
    tl_to = np.empty(n, dtype=np.int64)
    cnt = 0
    use_draws = draws.shape[0] > 0
    for i in range(m):
        u = a[i]
        v = b[i]
        iu = infected[u]
        iv = infected[v]
        if iu == iv or not allowed[i]:
            continue
        if use_draws and not draws[i] < prob:
            continue
        if iu:
            src, dst = u, v
        else:
            src, dst = v, u
        infected[dst] = True
        tl_idx[cnt] = i
        tl_from[cnt] = src
        tl_to[cnt] = dst
        cnt += 1
    return infected, tl_idx[:cnt], tl_from[:cnt], tl_to[:cnt]


def replay_np(a, b, allowed, draws, prob, seed, n):
    infected = np.zeros(n, dtype=bool)
    infected[seed] = True
    use_draws = len(draws) > 0
    tl_idx, tl_from, tl_to = [], [], []
    state = infected.tolist()
    ok = allowed.tolist()
    dr = draws.tolist() if use_draws else None
    for i, (u, v) in enumerate(zip(a.tolist(), b.tolist())):
        iu = state[u]
        if iu == state[v] or not ok[i]:
            continue
        if use_draws and not dr[i] < prob:
            continue
        src, dst = (u, v) if iu else (v, u)
        state[dst] = True
        tl_idx.append(i)
        tl_from.append(src)
        tl_to.append(dst)
    infected[:] = state
    as_arr = lambda x: np.asarray(x, dtype=np.int64)
    return infected, as_arr(tl_idx), as_arr(tl_from), as_arr(tl_to)


if USE_NUMBA:
    component_labels = component_labels_nb
    bfs_stats = bfs_stats_nb
    triangles_per_node = triangles_per_node_nb
    replay = replay_nb
else:
    component_labels = component_labels_np
    bfs_stats = bfs_stats_np
    triangles_per_node = triangles_per_node_np
    replay = replay_np

IMPLEMENTATIONS = {
    "numba": dict(component_labels=component_labels_nb, bfs_stats=bfs_stats_nb,
                  triangles_per_node=triangles_per_node_nb, replay=replay_nb),
    "numpy": dict(component_labels=component_labels_np, bfs_stats=bfs_stats_np,
                  triangles_per_node=triangles_per_node_np, replay=replay_np),
}
