import math
import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topobench.errors import BadParams, NoBalancedVariant
from topobench.resiliency import (
    FailureExperiment,
    _Batcher,
    reference_threshold,
    run_experiment,
    survivable_fraction,
    wilson_interval,
)
from topobench.topogen import build_mms
from topobench.topology import Topology, from_edge_list

# survival probability of SF q=5 at 50% and 55% removal, from 10^5 union-find
# permutations per the oracle below; threshold at cutoff 0.5 is therefore 0.50
SF5_ORACLE = {0.50: 0.677, 0.55: 0.434}
SF5_THRESHOLD = 0.50


def connectivity_oracle(topology, perms, seed):
    """Survival curve from random edge orders: keep the last E - k edges.

    One shuffle gives the number of kept edges at which the graph first
    becomes connected, which answers every removal count at once.
    """
    edges = [tuple(e) for e in topology.edges.tolist()]
    n, m = topology.n_routers, len(edges)
    rnd = random.Random(seed)
    need = []
    for _ in range(perms):
        rnd.shuffle(edges)
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        comps = n
        for i, (u, v) in enumerate(edges):
            a, b = find(u), find(v)
            if a != b:
                parent[a] = b
                comps -= 1
                if comps == 1:
                    need.append(i + 1)
                    break
    need = np.array(need)
    curve = {}
    for i in range(21):
        f = round(i * 0.05, 2)
        keep = m - math.ceil(f * m - 1e-9)
        curve[f] = float((need <= keep).mean())
    return curve


@pytest.fixture(scope="module")
def sf5():
    return build_mms(5)


@pytest.fixture(scope="module")
def sf5_disc(sf5):
    return run_experiment(FailureExperiment(sf5, "disconnection", seed=0))


def test_tree_survives_nothing():
    t = from_edge_list("\n".join(f"{i} {(i - 1) // 2}" for i in range(1, 31)))
    for metric in ("disconnection", "diameter_increase", "avgpath_increase"):
        res = run_experiment(FailureExperiment(t, metric, seed=1))
        assert res.threshold == 0.0
        assert res.curve[1].probability == 0.0


def test_sf5_threshold_matches_frozen_oracle(sf5_disc):
    assert sf5_disc.threshold == SF5_THRESHOLD
    got = {p.fraction: p.raw_probability for p in sf5_disc.curve}
    for f, want in SF5_ORACLE.items():
        assert got[f] == pytest.approx(want, abs=0.02)


def test_sf5_curve_matches_union_find_oracle(sf5, sf5_disc):
    oracle = connectivity_oracle(sf5, 20_000, seed=99)
    for p in sf5_disc.curve:
        assert p.raw_probability == pytest.approx(oracle[p.fraction], abs=0.03)
    assert max(f for f, v in oracle.items() if v >= 0.5) == SF5_THRESHOLD


def test_ci_width_reached(sf5_disc):
    for p in sf5_disc.curve:
        assert p.ci_high - p.ci_low <= 0.02 + 1e-12
        assert p.ci_low <= p.raw_probability <= p.ci_high


def test_curve_monotone_and_fractions_on_grid(sf5_disc):
    probs = [p.probability for p in sf5_disc.curve]
    assert all(b <= a for a, b in zip(probs, probs[1:]))
    for p in sf5_disc.curve:
        assert abs(p.fraction / 0.05 - round(p.fraction / 0.05)) < 1e-9
    assert sf5_disc.curve[0].removed == 0 and sf5_disc.curve[0].probability == 1.0


def test_disconnection_at_least_diameter_threshold(sf5, sf5_disc):
    diam = survivable_fraction(FailureExperiment(sf5, "diameter_increase", seed=0))
    assert sf5_disc.threshold >= diam >= 0


def test_deterministic(sf5):
    a = run_experiment(FailureExperiment(sf5, "diameter_increase", seed=4)).to_dict()
    b = run_experiment(FailureExperiment(sf5, "diameter_increase", seed=4)).to_dict()
    c = run_experiment(FailureExperiment(sf5, "diameter_increase", seed=5)).to_dict()
    assert a == b and a != c


def test_wilson_interval_known_values():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0 and hi == pytest.approx(0.2775, abs=1e-4)
    lo, hi = wilson_interval(50, 100)
    assert (lo, hi) == pytest.approx((0.4038, 0.5962), abs=1e-4)


@pytest.mark.parametrize("metric", ["diameter_increase", "avgpath_increase"])
def test_batched_distance_check_matches_networkx(sf5, metric):
    exp = FailureExperiment(sf5, metric, seed=0)
    box = _Batcher(exp)
    rng = np.random.default_rng(8)
    masks = np.concatenate([box.removal_masks(rng, 20, k) for k in (40, 70, 90, 110)])
    got = box.survives(masks)
    g0 = nx.Graph(list(map(tuple, sf5.edges.tolist())))
    for mask, ok in zip(masks, got):
        g = nx.Graph()
        g.add_nodes_from(range(sf5.n_routers))
        g.add_edges_from(tuple(e) for e in sf5.edges[~mask].tolist())
        if not nx.is_connected(g):
            want = False
        elif metric == "diameter_increase":
            want = nx.diameter(g) <= nx.diameter(g0) + 2
        else:
            want = nx.average_shortest_path_length(g) <= nx.average_shortest_path_length(g0) + 1
        assert ok == want
    assert 0 < got.sum() < len(got)


def test_removal_masks_exact_count(sf5):
    box = _Batcher(FailureExperiment(sf5))
    m = box.removal_masks(np.random.default_rng(0), 50, 37)
    assert (m.sum(axis=1) == 37).all()


def test_reference_table_gaps():
    assert reference_threshold("SF", 8192) == 75
    assert reference_threshold("sf", 256) == 45
    with pytest.raises(NoBalancedVariant):
        reference_threshold("SF", 1024)
    with pytest.raises(NoBalancedVariant):
        reference_threshold("FT3", 256)


def test_bad_experiments(sf5):
    with pytest.raises(BadParams):
        FailureExperiment(sf5, increment=1.5)
    with pytest.raises(BadParams):
        FailureExperiment(sf5, metric="latency")
    with pytest.raises(BadParams):
        run_experiment(FailureExperiment(from_edge_list("0 1\n2 3\n")))


def test_csv_rows(sf5_disc):
    row = sf5_disc.curve[10].csv_row()
    assert row[0] == "0.50" and int(row[4]) == sf5_disc.curve[10].trials
    assert sf5_disc.summary_row()[:2] == ["threshold", "0.50"]


def random_connected(n, p, seed):
    g = nx.gnp_random_graph(n, p, seed=seed)
    # a spanning path keeps it connected
    g.add_edges_from((i, i + 1) for i in range(n - 1))
    return Topology("CUSTOM", n, max(d for _, d in g.degree()), 1, np.array(sorted(g.edges())),
                    np.ones(n, dtype=np.int64))


@settings(max_examples=15, deadline=None)
@given(n=st.integers(6, 20), p=st.floats(0.2, 0.8), seed=st.integers(0, 10_000))
def test_curves_monotone_and_ordered(n, p, seed):
    t = random_connected(n, p, seed)
    kw = dict(seed=seed, max_trials=64, batch=64, increment=0.1)
    disc = run_experiment(FailureExperiment(t, "disconnection", **kw))
    diam = run_experiment(FailureExperiment(t, "diameter_increase", **kw))
    for res in (disc, diam):
        probs = [c.probability for c in res.curve]
        assert all(b <= a + 1e-12 for a, b in zip(probs, probs[1:]))
        raw = [c.raw_probability for c in res.curve]
        assert res.smoothed == any(b > a for a, b in zip(raw, raw[1:]))
    assert disc.threshold >= diam.threshold >= 0
