import numpy as np
import pytest

from oracles import measure_paths
from shortcutlab import Graph, Infeasible, ValidationError
from shortcutlab.graph import diameter
from shortcutlab.instances import cycle, grid, path_graph, random_tree, sample_connectable_pairs
from shortcutlab.pairs import PairSet
from shortcutlab.routing import Demand, RoutingScheme, baseline_scheme, opt_h, routing_oracle, sample_shortcuts, scheme_congestion
from shortcutlab.shortcut import measure_pair_shortcut


def _two_routes():
    # two disjoint 0-3 routes: 0-1-3 and 0-2-3
    return Graph(4, [(0, 1), (1, 3), (0, 2), (2, 3)])


def test_scheme_validates_distributions():
    g = _two_routes()
    with pytest.raises(ValidationError):
        RoutingScheme(g, {(0, 3): [(0.5, [0, 1, 3])]})
    with pytest.raises(ValidationError):
        RoutingScheme(g, {(0, 3): [(1.0, [0, 1])]})


def test_scheme_congestion_examples():
    g = path_graph(4)
    r = RoutingScheme(g, {(0, 3): [(1.0, [0, 1, 2, 3])]})
    assert scheme_congestion(Demand.unit([(0, 3)]), r) == 1
    g = _two_routes()
    r = RoutingScheme(g, {(0, 3): [(0.5, [0, 1, 3]), (0.5, [0, 2, 3])]})
    assert scheme_congestion(Demand.unit([(0, 3)]), r) == pytest.approx(0.5)


def test_scheme_congestion_matches_monte_carlo():
    g = _two_routes()
    r = RoutingScheme(g, {(0, 3): [(0.3, [0, 1, 3]), (0.7, [0, 2, 3])], (1, 2): [(1.0, [1, 0, 2])]})
    d = Demand({(0, 3): 4, (1, 2): 1})
    rng = np.random.default_rng(0)
    trials = 4000
    loads = np.zeros((trials, g.m))
    for t in range(trials):
        for (s, u), k in d.values.items():
            supp = r.distribution(s, u)
            for _ in range(k):
                p = supp[rng.choice(len(supp), p=[x for x, _ in supp])][1]
                for a, b in zip(p, p[1:]):
                    loads[t, g.edge_id(a, b)] += 1
    mean = loads.mean(axis=0)
    sd = loads.std(axis=0) / np.sqrt(trials)
    assert abs(scheme_congestion(d, r) - mean.max()) <= 3 * sd[mean.argmax()] + 1e-9


def test_opt_h_examples():
    g = path_graph(6)
    with pytest.raises(Infeasible):
        opt_h(g, Demand.unit([(0, 5)]), 4)
    k, h = 4, 5
    edges = []
    for i in range(k):
        nodes = [0] + [2 + i * (h - 1) + j for j in range(h - 1)] + [1]
        edges += list(zip(nodes, nodes[1:]))
    g = Graph(2 + k * (h - 1), edges)
    res = opt_h(g, Demand({(0, 1): k}), h)
    assert res.lower_bound <= 1 + 1e-6 and res.value == pytest.approx(1, abs=0.06)
    bott = Graph(6, [(0, 2), (1, 2), (2, 3), (3, 4), (3, 5)])
    res = opt_h(bott, Demand.unit([(0, 4), (1, 5)]), 6)
    assert res.value == pytest.approx(2) and res.lower_bound == pytest.approx(2, rel=0.06)


def test_opt_h_mw_and_lp_bracket_each_other():
    g = grid(5)
    d = Demand.unit([(0, 24), (4, 20), (2, 22)])
    lp = opt_h(g, d, 10)
    mw = opt_h(g, d, 10, solver="mw", eps=0.1, max_iter=400)
    assert lp.lower_bound <= mw.value + 1e-6
    assert mw.lower_bound <= lp.value + 1e-6


def test_sample_shortcuts_examples():
    g = path_graph(5)
    r = baseline_scheme(g, 4)
    s = PairSet([(0, 4)])
    q = measure_pair_shortcut(g, s, sample_shortcuts(r, s, 0))
    assert q.d == 4
    g = grid(4)
    s = PairSet([(0, 3), (12, 15)])
    r = RoutingScheme(g, {(0, 3): [(1.0, [0, 1, 2, 3])], (12, 15): [(1.0, [12, 13, 14, 15])]})
    assert measure_pair_shortcut(g, s, sample_shortcuts(r, s, 1)).c == 1


def test_sampled_dilation_never_exceeds_scheme():
    g = grid(6)
    pairs, _, _ = sample_connectable_pairs(g, 6, 3)
    r = baseline_scheme(g, 14, "mw-spread", pairs=list(pairs))
    for seed in range(20):
        ps = sample_shortcuts(r, pairs, seed)
        assert measure_paths(g, ps.paths)[1] <= r.dilation


def test_baseline_scheme_examples():
    t = random_tree(20, 1)
    pairs = [(0, 19), (3, 7)]
    a = baseline_scheme(t, diameter(t), "shortest")
    b = baseline_scheme(t, diameter(t), "mw-spread", pairs=pairs)
    for s, u in pairs:
        assert a.distribution(s, u)[0][1] == b.distribution(s, u)[0][1]
    c = cycle(10)
    r = baseline_scheme(c, 10, "shortest")
    assert len(r.distribution(0, 3)[0][1]) == 4
    assert len(r.distribution(0, 7)[0][1]) == 4
    with pytest.raises(Infeasible):
        baseline_scheme(c, 3, "shortest")


def test_mw_spread_beats_shortest_on_grid_mostly():
    g = grid(8)
    rng = np.random.default_rng(7)
    wins = 0
    seeds = 10
    for seed in range(seeds):
        nodes = rng.permutation(g.n)
        pairs = PairSet([(int(nodes[2 * i]), int(nodes[2 * i + 1])) for i in range(32)])
        short = sample_shortcuts(baseline_scheme(g, 14, "shortest"), pairs, seed)
        spread = sample_shortcuts(baseline_scheme(g, 14, "mw-spread", pairs=list(pairs), max_iter=300), pairs, seed)
        wins += measure_paths(g, spread.paths)[0] <= measure_paths(g, short.paths)[0]
    assert wins >= 0.8 * seeds


def test_routing_oracle_returns_valid_paths():
    g = grid(5)
    pairs = PairSet([(0, 4), (20, 24), (12, 12)])
    ps = routing_oracle(g, 0, max_iter=100)(pairs)
    for (s, t), p in zip(pairs, ps.paths):
        assert p[0] == s and p[-1] == t
