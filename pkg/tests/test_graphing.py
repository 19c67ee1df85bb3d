import numpy as np
from hypothesis import given, settings, strategies as st

from conftest import ev, random_trace
from oracles import bfs_components, random_graph
from d2dkit.graphing import (EncounterGraph, Group, GroupPartition, build_encounter_graph, compute_groups,
                             events_by_group, group_size_histogram)
from d2dkit.trace import Trace


def test_direction_ignored_and_stats_aggregated():
    g = build_encounter_graph([ev(1, 1, 2, size=10), ev(5, 2, 1, size=30)])
    stats = g.edges()
    assert list(stats) == [(1, 2)]
    e = stats[(1, 2)]
    assert (e.event_count, e.total_bytes, e.first_ts, e.last_ts) == (2, 40, 1, 5)


def test_empty_trace_gives_empty_graph():
    g = build_encounter_graph(Trace.empty())
    assert g.num_nodes == 0 and g.num_edges == 0
    assert compute_groups(g).groups == []
    assert group_size_histogram(compute_groups(g)) == {}


def test_counts_sum_to_events(rng):
    t = random_trace(rng, 400)
    g = build_encounter_graph(t)
    assert int(g.event_count.sum()) == len(t)
    assert int(g.total_bytes.sum()) == int(t.size.sum())
    assert np.all(g.first_ts <= g.last_ts)


def test_hand_partition():
    g = EncounterGraph.from_edges([(1, 2), (2, 3), (4, 5)])
    part = compute_groups(g)
    assert [(grp.id, grp.members.tolist()) for grp in part.groups] == [(1, [1, 2, 3]), (4, [4, 5])]
    assert group_size_histogram(part) == {2: 1, 3: 1}


def test_isolated_node_is_singleton():
    part = compute_groups(EncounterGraph.from_edges([], nodes=[7]))
    assert [(grp.id, grp.members.tolist()) for grp in part.groups] == [(7, [7])]


def test_partition_matches_bfs_oracle(rng):
    for _ in range(300):
        g, ids, edges = random_graph(rng)
        assert compute_groups(g).group_of == bfs_components(ids, edges)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)).filter(lambda e: e[0] != e[1]), max_size=60),
       st.randoms(use_true_random=False))
def test_partition_order_invariant(edges, rnd):
    if not edges:
        return
    shuffled = edges[:]
    rnd.shuffle(shuffled)
    shuffled = [(b, a) if rnd.random() < 0.5 else (a, b) for a, b in shuffled]
    a = compute_groups(EncounterGraph.from_edges(edges))
    b = compute_groups(EncounterGraph.from_edges(shuffled))
    assert a.group_of == b.group_of


def test_histogram_matches_ledger(default_generated):
    trace, ledger = default_generated
    hist = group_size_histogram(compute_groups(build_encounter_graph(trace)))
    want = {}
    for s in ledger.group_sizes:
        want[s] = want.get(s, 0) + 1
    assert hist == dict(sorted(want.items()))


def test_csr_and_degree():
    g = EncounterGraph.from_edges([(1, 2), (1, 3), (3, 4)])
    assert g.degree().tolist() == [2, 1, 2, 1]
    assert g.neighbors(1).tolist() == [2, 3]
    ids, indptr, indices = g.subgraph([1, 3, 4])
    assert ids.tolist() == [1, 3, 4] and indptr.tolist() == [0, 1, 3, 4]


def test_strength_counts_events():
    g = build_encounter_graph([ev(1, 1, 2), ev(2, 1, 2), ev(3, 2, 3)])
    assert g.strength().tolist() == [2, 3, 1]


def test_events_by_group(rng):
    t = random_trace(rng, 100, n_users=6)
    part = GroupPartition([Group(0, np.array([0, 1, 2])), Group(3, np.array([3, 4, 5]))],
                          {0: 0, 1: 0, 2: 0, 3: 3, 4: 3, 5: 3})
    by = events_by_group(t, part, [0, 3])
    assert len(by[0]) + len(by[3]) == len(t)
    assert set(by[0].sender.tolist()) <= {0, 1, 2}
    assert np.all(np.diff(by[3].ts) >= 0)
