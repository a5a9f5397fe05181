import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topobench.errors import NoFormula
from topobench.metrics import (
    analytic_bisection,
    bisection_heuristic,
    bisection_search,
    diameter_and_avg,
    structural_report,
)
from topobench.topogen import build_mms, build_reference
from topobench.topology import from_edge_list

from oracles import SMALL_GRAPHS, exhaustive_bisection, spectral_lower_bound, topo_from_nx


def test_oracle_known_values():
    assert exhaustive_bisection(4, list(nx.complete_graph(4).edges())) == 4
    q4 = topo_from_nx(nx.hypercube_graph(4))
    assert exhaustive_bisection(16, q4.edges) == 8
    assert exhaustive_bisection(6, list(nx.cycle_graph(6).edges())) == 2


def test_k4_and_q4_cuts():
    assert bisection_heuristic(topo_from_nx(nx.complete_graph(4)), restarts=4) == 4
    assert bisection_heuristic(build_reference("HC", n=4), restarts=8) == 8


@pytest.mark.parametrize("name", sorted(SMALL_GRAPHS))
def test_heuristic_matches_exhaustive(name):
    t = topo_from_nx(SMALL_GRAPHS[name])
    assert t.n_routers <= 24
    assert bisection_heuristic(t, restarts=16, seed=1) == exhaustive_bisection(t.n_routers, t.edges)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(4, 12), p=st.floats(0.2, 0.8), gseed=st.integers(0, 10_000))
def test_heuristic_never_below_optimum(n, p, gseed):
    t = topo_from_nx(nx.gnp_random_graph(n, p, seed=gseed))
    opt = exhaustive_bisection(n, t.edges) if t.n_edges else 0
    got = bisection_heuristic(t, restarts=12, seed=gseed)
    assert got >= opt
    assert got == opt


def test_sf5_within_five_percent_of_certified_bound():
    t = build_mms(5)
    lower = math.ceil(spectral_lower_bound(t) - 1e-9)
    assert lower == 63
    got = bisection_heuristic(t, restarts=16, seed=0)
    assert lower <= got <= 1.05 * lower


def test_more_restarts_never_worse():
    t = build_mms(7)
    cuts = [bisection_heuristic(t, restarts=r, seed=3) for r in (1, 2, 4, 8)]
    assert cuts == sorted(cuts, reverse=True)


def test_bisection_deterministic():
    t = build_mms(7)
    a, b = bisection_search(t, 4, seed=9), bisection_search(t, 4, seed=9)
    assert a.cuts == b.cuts
    assert a.best == min(a.cuts) and a.median == float(np.median(a.cuts))


def test_best_side_is_balanced_and_matches_cut():
    t = build_mms(5)
    r = bisection_search(t, 3, seed=2)
    side = r.best_side
    assert side.sum() == 25
    assert sum(side[u] != side[v] for u, v in t.edges) == r.best


def test_bisection_bounds_connected():
    t = build_reference("DF", p=2, h=2, a=4)
    cut = bisection_heuristic(t, 4)
    assert 1 <= cut <= t.n_edges


def test_sf_diameter_two():
    for q in (4, 5, 7, 8, 9):
        d, avg = diameter_and_avg(build_mms(q))
        assert d == 2 and avg < 2


def test_complete_graph_distance():
    assert diameter_and_avg(topo_from_nx(nx.complete_graph(5))) == (1.0, 1.0)


def test_small_dragonfly_diameter_three():
    t = build_reference("DF", p=2, h=2, a=4)
    d, _ = diameter_and_avg(t)
    G = nx.Graph(list(map(tuple, t.edges.tolist())))
    assert d == 3 == nx.diameter(G)


def test_avg_distance_matches_networkx():
    t = build_reference("DF", p=2, h=2, a=4)
    G = nx.Graph(list(map(tuple, t.edges.tolist())))
    _, avg = diameter_and_avg(t)
    assert avg == pytest.approx(nx.average_shortest_path_length(G))


def test_disconnected_is_infinite():
    t = from_edge_list("0 1\n2 3\n")
    d, avg = diameter_and_avg(t)
    assert math.isinf(d) and math.isinf(avg)
    assert structural_report(t, bisection=False).connected is False


def test_avg_distance_ordering_matched_size():
    sf = build_mms(7)                                   # N = 588
    df = build_reference("DF", p=4, h=2, a=8)           # N = 544
    ft = build_reference("FT3", p=8, concentration=9)   # N = 576
    for t in (df, ft):
        assert abs(t.n_endpoints - sf.n_endpoints) / sf.n_endpoints <= 0.10
    a_sf, a_df, a_ft = (diameter_and_avg(t)[1] for t in (sf, df, ft))
    assert a_sf < a_df < a_ft


@pytest.mark.parametrize(
    "kind,N,kp,p,expected",
    [
        ("HC", 1024, None, None, 512),
        ("FT3", 1000, None, None, 500),
        ("T3D", 1000, 6, None, 333),
        ("T5D", 1024, 10, None, 204),
        ("DF", 9702, None, 7, 2449),
        ("FBF3", 1000, None, 10, 299),
        ("LH-HC", 1024, None, None, 1536),
    ],
)
def test_analytic_bisection(kind, N, kp, p, expected):
    assert analytic_bisection(kind, N, kp, p) == expected


@pytest.mark.parametrize("kind", ["SF_MMS", "DLN"])
def test_analytic_bisection_no_formula(kind):
    with pytest.raises(NoFormula):
        analytic_bisection(kind, 100, 7, 4)


def test_report_row_and_units():
    rep = structural_report(build_mms(5), restarts=4, seed=0)
    row = rep.csv_row()
    assert list(row) == ["kind", "params", "N", "diameter", "avg_distance", "bisection_links", "bisection_Gbps"]
    assert row["diameter"] == 2 and row["N"] == 200
    assert rep.bisection_gbps == rep.bisection_links * 10.0
    assert rep.avg_distance <= rep.diameter
