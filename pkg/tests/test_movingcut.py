from fractions import Fraction

import numpy as np
import pytest

from oracles import best_cut_distance, set_distance
from shortcutlab import Graph, Infeasible
from shortcutlab.instances import cycle, gadget, grid, path_graph, random_graph, random_tree
from shortcutlab.movingcut import (
    MovingCut,
    capacity,
    count_vectors,
    distance,
    mc_of_graph_estimate,
    pair_distances,
    read_cut,
    scale,
    search,
    validate,
    write_cut,
)
from shortcutlab.pairs import PairSet


def test_capacity_examples(rng):
    g = path_graph(4)
    assert capacity(MovingCut.unit(g)) == 0
    assert capacity(MovingCut(g, [1, 3, 2])) == 3
    k4 = Graph(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    ell = rng.integers(1, 9, k4.m)
    assert capacity(MovingCut(k4, ell)) == sum(int(x) - 1 for x in ell)


def test_lengths_must_be_positive():
    with pytest.raises(ValueError):
        MovingCut(path_graph(3), [1, 0])


def test_distance_is_set_to_set():
    g = cycle(10)
    assert distance(g, MovingCut.unit(g), PairSet([(0, 5)])) == 5
    g = path_graph(6)
    s = PairSet([(0, 5), (2, 3)])
    mc = MovingCut.unit(g)
    assert distance(g, mc, s) == 1
    assert pair_distances(g, mc, s) == [5, 1]
    s = PairSet([(0, 3), (4, 1)])
    assert distance(g, mc, s) == 1


def test_distance_matches_dijkstra(rng):
    for seed in range(25):
        g = random_graph(8, 0.35, seed)
        ell = rng.integers(1, 5, g.m)
        s = PairSet([(0, 7), (1, 6)])
        assert distance(g, MovingCut(g, ell), s) == set_distance(g, ell, [0, 1], [7, 6])


def test_validate_examples(rng):
    g = grid(4)
    s = PairSet([(0, 15)])
    assert validate(g, MovingCut.unit(g), s, k=1, beta=6).ok
    ell = np.ones(g.m, np.int64)
    ell[0] = 2
    rep = validate(g, MovingCut(g, ell), s, k=1)
    assert not rep.ok and "capacity" in rep.reason
    rep = validate(g, MovingCut.unit(g), s, k=1, beta=7)
    assert not rep.ok and "distance" in rep.reason
    for _ in range(30):
        ell = rng.integers(1, 3, g.m)
        mc = MovingCut(g, ell)
        k = int(rng.integers(1, 20))
        beta = int(rng.integers(0, 12))
        rep = validate(g, mc, s, k=k, beta=beta)
        truth = int((ell - 1).sum()) < k and set_distance(g, ell, [0], [15]) >= beta
        assert rep.ok == truth


def test_scale_examples():
    g = path_graph(4)
    mc = MovingCut(g, [1, 5, 3])
    assert scale(mc, 2).lengths.tolist() == [1, 3, 2]
    assert scale(mc, 1).lengths.tolist() == [1, 5, 3]
    assert scale(mc, Fraction(3, 2)).lengths.tolist() == [1, 3, 2]
    with pytest.raises(ValueError):
        scale(mc, Fraction(1, 2))


def test_count_vectors():
    assert count_vectors(3, 2, 10) == 27
    assert count_vectors(3, 2, 1) == 4
    assert count_vectors(2, 3, 0) == 1


def test_search_cycle_single_pair():
    g = cycle(12)
    for mode in ("lp", "exact"):
        res = search(g, PairSet([(0, 6)]), mode)
        assert res.beta == 6 and res.capacity == 0


def test_search_exact_matches_enumeration():
    g = Graph(6, [(0, 1), (1, 2), (2, 5), (0, 3), (3, 4), (4, 5)])
    s = PairSet([(0, 5), (0, 5)])
    res = search(g, s, "exact", lmax=3)
    assert res.beta == best_cut_distance(g, [0], [5], 2, 3)
    assert validate(g, res.cut, s, beta=res.beta).ok


def test_search_lp_vs_exact_on_miniature():
    inst = gadget(3, 4)
    g, s = inst.graph, inst.pairs
    lp = search(g, s, "lp")
    assert validate(g, lp.cut, s, beta=lp.beta).ok
    assert lp.upper_bound + 1e-6 >= lp.beta
    small = Graph(7, [(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 3), (1, 6), (6, 5)])
    s = PairSet([(0, 3), (0, 3), (0, 3)])
    ex = search(small, s, "exact", lmax=3)
    lp = search(small, s, "lp")
    assert ex.beta >= lp.beta
    assert lp.beta >= (lp.upper_bound if lp.upper_bound else 0) / (1 + float(lp.c_round)) - 1e-9
    assert validate(small, ex.cut, s, beta=ex.beta).ok


def test_search_flow_and_cutting_plane_agree_in_value():
    for seed in range(5):
        g = random_graph(14, 0.25, seed)
        s = PairSet([(0, 13), (1, 12), (2, 11)])
        a = search(g, s, "lp", solver="cutting-plane")
        b = search(g, s, "lp", solver="flow")
        assert abs(a.upper_bound - b.upper_bound) < 1e-6
        assert validate(g, a.cut, s, beta=a.beta).ok and validate(g, b.cut, s, beta=b.beta).ok


def test_search_k_below_one():
    with pytest.raises(Infeasible):
        search(path_graph(3), PairSet([(0, 2)]), k=0)


def test_mc_of_graph_estimate():
    t = random_tree(15, 2)
    from shortcutlab.graph import diameter

    ends = _diametral(t)
    est = mc_of_graph_estimate(t, lambda i: PairSet([ends]), 1)
    assert est["estimate"] == diameter(t) and est["kind"] == "lower"
    c = cycle(11)
    assert mc_of_graph_estimate(c, lambda i: PairSet([(0, 5)]), 1)["estimate"] >= 5


def _diametral(g):
    from shortcutlab.graph import bfs_distances

    a = int(np.argmax(bfs_distances(g, [0])))
    b = int(np.argmax(bfs_distances(g, [a])))
    return (a, b)


def test_cut_file_round_trip(tmp_path):
    g = grid(3)
    mc = MovingCut(g, np.arange(g.m) % 3 + 1)
    write_cut(mc, tmp_path / "c.txt")
    assert read_cut(g, tmp_path / "c.txt").lengths.tolist() == mc.lengths.tolist()
