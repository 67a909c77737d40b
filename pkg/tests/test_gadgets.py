import math

import networkx as nx
import numpy as np
import pytest

from oracles import to_nx
from shortcutlab import ConstructionShortfall, Graph, HypothesisViolated
from shortcutlab.gadgets import (
    Crown,
    DiameterRegime,
    DisjointnessGadget,
    RelaxedGadget,
    build_contraction_graph,
    cover_count,
    crown_from_pairs,
    crown_to_relaxed,
    crowns_high_degree,
    crowns_low_degree,
    family_gadget,
    gadget_from_json,
    gadget_to_json,
    graph_diameter,
    high_degree_charging_holds,
    independent_set_min_degree,
    is_locally_minimal,
    merge_crowns,
    minimalize_paths,
    path_split,
    pipeline,
    strictify,
    validate_crown,
    validate_relaxed,
    validate_strict,
    walk_edge_ids,
)
from shortcutlab.graph import bfs_path, project_walk
from shortcutlab.instances import cycle, gadget, grid, grid_row_pairs, random_graph, random_tree, sample_connectable_pairs
from shortcutlab.movingcut import MovingCut, search
from shortcutlab.pairs import PairSet, PartPaths


def _adjacent_oracle(g, pp, i, j):
    """Contract p_i and p_j, drop every other part-path, test reachability."""
    h = to_nx(g)
    other = {v for q, p in enumerate(pp.paths) if q not in (i, j) for v in p}
    h.remove_nodes_from(other)
    h.remove_edges_from([(a, b) for a, b in zip(pp.paths[i], pp.paths[i][1:])])
    h.remove_edges_from([(a, b) for a, b in zip(pp.paths[j], pp.paths[j][1:])])
    for v in pp.paths[i][1:]:
        h = nx.contracted_nodes(h, pp.paths[i][0], v, self_loops=False)
    for v in pp.paths[j][1:]:
        h = nx.contracted_nodes(h, pp.paths[j][0], v, self_loops=False)
    return nx.has_path(h, pp.paths[i][0], pp.paths[j][0])


def test_contraction_graph_examples():
    g = Graph(6, [(0, 1), (1, 2), (3, 4), (4, 5), (2, 3)])
    r = build_contraction_graph(g, PartPaths(g, [[0, 1, 2], [3, 4, 5]]))
    assert r.edges() == [(0, 1)]
    hub = 12
    edges = [(3 * i + a, 3 * i + a + 1) for i in range(4) for a in range(2)] + [(3 * i + 1, hub) for i in range(4)]
    g = Graph(13, edges)
    r = build_contraction_graph(g, PartPaths(g, [[3 * i, 3 * i + 1, 3 * i + 2] for i in range(4)]))
    assert len(r.edges()) == 6
    w = r.witness(0, 2)
    assert w[0] in (0, 1, 2) and w[-1] in (6, 7, 8) and w[1:-1] == (hub,)


def test_contraction_graph_matches_oracle():
    for seed in range(20):
        g = random_graph(10, 0.3, seed)
        pairs, pp, count = sample_connectable_pairs(g, 3, seed)
        if count < 2:
            continue
        r = build_contraction_graph(g, pp)
        for i in range(pp.k):
            for j in range(i + 1, pp.k):
                assert r.has_edge(i, j) == _adjacent_oracle(g, pp, i, j)


def test_project_walk_lands_on_contraction_graph():
    g = grid(6)
    pairs, pp, _ = sample_connectable_pairs(g, 4, 1)
    r = build_contraction_graph(g, pp)
    for s in range(0, g.n, 5):
        walk = bfs_path(g, 0, s)
        proj = project_walk(walk, pp.part_of)
        assert all(r.has_edge(a, b) for a, b in zip(proj, proj[1:]))


def test_minimalize_paths():
    g = grid(4)
    straight = PartPaths(g, [[0, 1, 2, 3]])
    assert minimalize_paths(g, None, straight).paths == straight.paths
    detour = PartPaths(g, [[0, 4, 5, 1, 2, 3]])
    out = minimalize_paths(g, None, detour)
    assert len(out.paths[0]) == 4 and out.paths[0][0] == 0 and out.paths[0][-1] == 3
    for seed in range(8):
        h = grid(7)
        _, pp, _ = sample_connectable_pairs(h, 5, seed)
        assert is_locally_minimal(h, minimalize_paths(h, None, pp))


def _star_instance():
    edges = [(0, 1), (1, 2), (3, 4), (5, 6), (7, 8), (1, 3), (1, 5), (1, 7)]
    g = Graph(9, edges)
    return g, PartPaths(g, [[0, 1, 2], [3, 4], [5, 6], [7, 8]])


def test_crowns_high_degree_star():
    g, pp = _star_instance()
    r = build_contraction_graph(g, pp)
    crowns = crowns_high_degree(r)
    assert len(crowns) == 1
    assert crowns[0].A == {0, 1, 2, 3} and crowns[0].U == {1, 2, 3}
    assert validate_crown(g, pp, crowns[0], graph_diameter(g)).ok
    assert high_degree_charging_holds(r, crowns)


def test_crowns_high_degree_path_is_empty():
    g, pp = grid_row_pairs(6, 4)
    assert crowns_high_degree(build_contraction_graph(g, pp)) == []


def test_path_split_constants():
    assert path_split(9) == 2 and 2 * path_split(9) == 4
    assert path_split(10) == 5


def test_crowns_low_degree_on_rows():
    g, pp = grid_row_pairs(40, 30)
    d = graph_diameter(g)
    r = build_contraction_graph(g, pp)
    crowns = crowns_low_degree(g, r, pp, d)
    assert crowns
    seen = set()
    for c in crowns:
        assert validate_crown(g, pp, c, d).ok
        assert not (seen & c.A)
        seen |= c.A
    merged = merge_crowns(g, pp, crowns)
    assert merged.A == seen and validate_crown(g, pp, merged, d).ok


def test_merge_single_crown_unchanged():
    g, pp = _star_instance()
    c = crowns_high_degree(build_contraction_graph(g, pp))[0]
    m = merge_crowns(g, pp, [c])
    assert m.A == c.A and m.U == c.U and m.T.tolist() == c.T.tolist()


def test_crown_needs_nine_pairs():
    inst = gadget(1, 5)
    with pytest.raises(ConstructionShortfall, match="9"):
        crown_from_pairs(inst.graph, inst.pairs, inst.paths)


def test_independent_set_on_five_cycle():
    out = independent_set_min_degree(range(5), [(i, (i + 1) % 5) for i in range(5)])
    assert len(out) >= math.ceil(5 / 5)
    assert all((b - a) % 5 not in (1, 4) for a in out for b in out if a != b)


def test_cover_count():
    assert cover_count([], 3) == 0
    assert cover_count([0, 3], 3) == 1
    assert cover_count([0, 4, 8, 9], 3) == 3


def test_medium_gadget_end_to_end():
    inst = gadget(64, 40)
    g = inst.graph
    d = graph_diameter(g)
    crown = crown_from_pairs(g, inst.pairs, inst.paths, d)
    assert len(crown.U) >= math.ceil(64 / 280)
    assert validate_crown(g, crown.paths, crown, d).ok
    rg = crown_to_relaxed(g, crown, d=d)
    assert validate_relaxed(g, rg, d).ok
    assert len(rg.paths) >= math.ceil(len(crown.U) / 5)


def test_strictify_rejects_short_cut():
    inst = gadget(16, 10)
    g = inst.graph
    d = graph_diameter(g)
    crown = crown_from_pairs(g, inst.pairs, inst.paths, d)
    rg = crown_to_relaxed(g, crown, d=d)
    with pytest.raises(HypothesisViolated):
        strictify(g, rg, MovingCut.unit(g), 9 * d - 1, d)


def test_strict_pipeline_on_large_gadget():
    inst = gadget(300, 150)
    g = inst.graph
    res = pipeline(g, inst.pairs, inst.paths)
    assert isinstance(res, DisjointnessGadget)
    assert validate_strict(g, res).ok
    assert all(len(p) - 1 >= 3 for p in res.paths)
    assert res.beta <= search(g, inst.pairs, "lp").beta


def _hand_built():
    """Four rows whose endpoints hang off one binary tree, unit cut."""
    from shortcutlab.movingcut import distance

    inst = gadget(4, 6, hubs="endpoints")
    g = inst.graph
    tree = g.edge_ids(inst.meta["tree_edges"])
    mc = MovingCut.unit(g)
    return g, DisjointnessGadget(tuple(map(tuple, inst.paths)), tree, mc, distance(g, mc, inst.pairs))


def test_validate_strict_hand_built():
    g, sg = _hand_built()
    assert validate_strict(g, sg).ok
    broken = DisjointnessGadget(sg.paths, sg.tree[1:], sg.cut, sg.beta)
    rep = validate_strict(g, broken)
    assert not rep.ok and ("disconnected" in rep.reason or "endpoints" in rep.reason)
    ell = np.ones(g.m, np.int64)
    ell[0] = 100
    rep = validate_strict(g, DisjointnessGadget(sg.paths, sg.tree, MovingCut(g, ell), sg.beta))
    assert not rep.ok and "capacity" in rep.reason


def test_validate_strict_rejects_short_paths():
    g = Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    sg = DisjointnessGadget(((0, 1, 2),), np.array([g.edge_id(0, 3), g.edge_id(2, 3)]), MovingCut.unit(g), 1)
    assert "hop length" in validate_strict(g, sg).reason


def test_pipeline_diameter_regime():
    t = random_tree(30, 0)
    res = pipeline(t, PairSet([(0, 29)]))
    assert isinstance(res, DiameterRegime)
    c = cycle(40)
    res = pipeline(c, PairSet([(0, 20)]))
    assert isinstance(res, DiameterRegime) and (res.beta, res.d) == (20, 20)
    assert "diameter regime" in res.reason


def test_family_gadget_and_json_round_trip():
    inst = gadget(8, 5)
    g = inst.graph
    sg = family_gadget(inst)
    assert validate_strict(g, sg).ok
    back = gadget_from_json(g, gadget_to_json(g, sg))
    assert back.paths == sg.paths and back.tree.tolist() == sg.tree.tolist()
    assert back.cut.lengths.tolist() == sg.cut.lengths.tolist() and back.beta == sg.beta
    assert gadget_to_json(g, back) == gadget_to_json(g, sg)


def test_validate_relaxed_and_crown_clauses():
    g, pp = _star_instance()
    c = Crown(walk_edge_ids(g, [0, 1, 2]), {0, 1, 2, 3}, {1, 2, 3}, pp)
    rep = validate_crown(g, pp, c, 4)
    assert not rep.ok and "misses" in rep.reason
    rg = RelaxedGadget(((3, 4),), walk_edge_ids(g, [0, 1, 2]))
    assert "endpoint" in validate_relaxed(g, rg, 4).reason
