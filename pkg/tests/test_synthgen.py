import io

import numpy as np
import pytest
from scipy import stats

from d2dkit.graphing import EncounterGraph, build_encounter_graph, compute_groups
from d2dkit.netmetrics import fit_powerlaw_mle
from d2dkit.synthgen import (DEFAULT_CATEGORY_MIX, GeneratorConfig, GroundTruthLedger, generate_trace,
                             ring_lattice_rewire, sample_powerlaw_sizes)
from d2dkit.trace import CATEGORIES, write_event_log


def test_sizes_collapse_to_xmin_for_huge_alpha():
    sizes = sample_powerlaw_sizes(10_000, 50.0, 2, np.random.default_rng(0))
    assert (sizes == 2).mean() >= 0.99


def test_sizes_deterministic_and_bounded():
    a = sample_powerlaw_sizes(1000, 2.2, 3, np.random.default_rng(4))
    b = sample_powerlaw_sizes(1000, 2.2, 3, np.random.default_rng(4))
    assert np.array_equal(a, b) and a.min() >= 3


def test_sizes_match_exact_pmf():
    # chi-square of the first few support points against zeta-normalised masses
    from scipy.special import zeta
    alpha, xmin, n = 2.5, 2, 50_000
    sizes = sample_powerlaw_sizes(n, alpha, xmin, np.random.default_rng(1))
    ks = np.arange(xmin, xmin + 6)
    p = ks ** -alpha / zeta(alpha, xmin)
    obs = np.array([(sizes == k).sum() for k in ks] + [(sizes >= ks[-1] + 1).sum()])
    exp = np.append(p, 1 - p.sum()) * n
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_sizes_recover_alpha():
    sizes = sample_powerlaw_sizes(10_000, 2.5, 2, np.random.default_rng(2))
    assert 2.4 <= fit_powerlaw_mle(sizes, 2).alpha_hat <= 2.6


def test_sizes_reject_bad_alpha():
    with pytest.raises(ValueError):
        sample_powerlaw_sizes(10, 1.0, 2, np.random.default_rng(0))


def test_ring_lattice_small_group_is_complete():
    e = ring_lattice_rewire(4, 4, 0.5, np.random.default_rng(0))
    assert len(e) == 6


def test_ring_lattice_degree_and_connectivity():
    rng = np.random.default_rng(0)
    for n in (6, 30, 200):
        e = ring_lattice_rewire(n, 4, 0.15, rng)
        assert len(e) == n * 2  # rewiring keeps the edge count
        assert np.all(e[:, 0] < e[:, 1])
        assert len(compute_groups(EncounterGraph.from_edges(e.tolist())).groups) == 1


def test_no_rewiring_gives_ring_lattice():
    e = ring_lattice_rewire(10, 4, 0.0, np.random.default_rng(0))
    want = sorted(tuple(sorted((i, (i + j) % 10))) for j in (1, 2) for i in range(10))
    assert [tuple(x) for x in e.tolist()] == want


def test_singleton_group_has_no_events():
    cfg = GeneratorConfig(num_groups=1, size_xmin=1)
    trace, ledger = generate_trace(cfg, size_override=[1])
    assert len(trace) == 0 and ledger.event_count == 0 and ledger.group_sizes == [1]


def test_generation_is_byte_identical(small_generated):
    a = io.StringIO()
    write_event_log(a, small_generated[0])
    trace, _ = generate_trace(GeneratorConfig(num_groups=150, rng_seed=3))
    b = io.StringIO()
    write_event_log(b, trace)
    assert a.getvalue() == b.getvalue()


def test_different_seed_differs(small_generated):
    other, _ = generate_trace(GeneratorConfig(num_groups=150, rng_seed=4))
    assert len(other) != len(small_generated[0]) or not np.array_equal(other.ts, small_generated[0].ts)


def test_ledger_partition_recovered(default_generated):
    trace, ledger = default_generated
    part = compute_groups(build_encounter_graph(trace))
    assert part.group_of == ledger.group_of
    assert sorted(g.size for g in part.groups) == sorted(ledger.group_sizes)


def test_no_cross_group_events_and_counts(default_generated):
    trace, ledger = default_generated
    g = ledger.group_of
    assert all(g[s] == g[r] for s, r in zip(trace.sender.tolist(), trace.receiver.tolist()))
    assert ledger.event_count == len(trace)
    assert sum(ledger.group_sizes) == len(ledger.group_of)


def test_events_inside_span_and_sorted(default_generated):
    trace, _ = default_generated
    assert trace.min_ts <= trace.ts.min() and trace.ts.max() < trace.max_ts
    assert np.array_equal(trace.order(), np.arange(len(trace)))


def test_tiers_only_on_topology_edges(default_generated):
    trace, ledger = default_generated
    pairs = set(zip(np.minimum(trace.sender, trace.receiver).tolist(),
                    np.maximum(trace.sender, trace.receiver).tolist()))
    assert all((r.user_a, r.user_b) in pairs for r in ledger.tiers)


def test_geo_near_home_cell(small_generated):
    trace, ledger = small_generated
    has = ~np.isnan(trace.lat)
    assert 0.1 < has.mean() < 0.3
    home = np.array([ledger.home_cell[ledger.group_of[s]] for s in trace.sender[has].tolist()])
    assert np.abs(trace.lat[has] - home[:, 0]).max() < 0.1


def test_category_mix_converges():
    trace, _ = generate_trace(GeneratorConfig(num_groups=2000, rng_seed=11, events_per_user_week=3.0))
    assert len(trace) >= 100_000
    obs = np.bincount(trace.category, minlength=len(CATEGORIES))
    exp = np.array([DEFAULT_CATEGORY_MIX[c] for c in CATEGORIES]) * len(trace)
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_same_file_same_size(default_generated):
    trace, _ = default_generated
    order = np.argsort(trace.file, kind="stable")
    f, s = trace.file[order], trace.size[order]
    same = f[1:] == f[:-1]
    assert np.array_equal(s[1:][same], s[:-1][same])


def test_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig(category_mix={"app": 0.5, "video": 0.4})
    with pytest.raises(ValueError):
        GeneratorConfig(size_alpha=1.0)
    with pytest.raises(ValueError):
        GeneratorConfig(mean_degree=3)
    with pytest.raises(ValueError):
        GeneratorConfig.from_dict({"bogus": 1})
    cfg = GeneratorConfig.from_dict({"rng_seed": 3})
    assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.digest() != GeneratorConfig().digest()


def test_ledger_dict_round_trip(small_generated):
    _, ledger = small_generated
    back = GroundTruthLedger.from_dict(ledger.to_dict())
    assert back.group_of == ledger.group_of and back.tiers == ledger.tiers
