import math

import pytest

from oracles import spans_connected
from shortcutlab import GraphError
from shortcutlab.graph import diameter
from shortcutlab.instances import (
    InstanceSpec,
    cycle,
    gadget,
    gen,
    grid,
    grid_row_pairs,
    random_graph,
    random_partition,
    random_tree,
    sample_connectable_pairs,
)
from shortcutlab.pairs import PartPaths


def test_cycle_example():
    g = cycle(8)
    assert (g.n, g.m, diameter(g)) == (8, 8, 4)


def test_gadget_miniature():
    inst = gadget(3, 4, hubs="endpoints")
    g = inst.graph
    depth = math.ceil(math.log2(6))
    assert g.n == 3 * 5 + (3 + 2 + 1)
    assert inst.pairs.k == 3 and len(inst.paths) == 3
    PartPaths(g, list(inst.paths))
    assert inst.partition.k == 3
    tree = g.edge_ids(inst.meta["tree_edges"])
    ends = {v for p in inst.paths for v in (p[0], p[-1])}
    tree_nodes = {v for e in tree.tolist() for v in g.edge(e)}
    assert ends <= tree_nodes
    assert spans_connected(len(tree_nodes), _relabel(g, tree))
    assert depth == 3


def _relabel(g, ids):
    nodes = sorted({v for e in ids.tolist() for v in g.edge(e)})
    idx = {v: i for i, v in enumerate(nodes)}
    return [(idx[a], idx[b]) for a, b in (g.edge(e) for e in ids.tolist())]


def test_gadget_columns_tree_spans_endpoints():
    inst = gadget(8, 6)
    g = inst.graph
    tree = g.edge_ids(inst.meta["tree_edges"])
    tree_nodes = {v for e in tree.tolist() for v in g.edge(e)}
    assert {v for p in inst.paths for v in (p[0], p[-1])} <= tree_nodes
    assert spans_connected(len(tree_nodes), _relabel(g, tree))
    assert len(tree) == len(tree_nodes) - 1


def test_generators_are_deterministic():
    a = random_graph(64, 0.1, 5)
    b = random_graph(64, 0.1, 5)
    assert a == b
    assert random_tree(30, 1) == random_tree(30, 1)
    spec = InstanceSpec("random", {"n": 40, "p": 0.1}, 3)
    assert gen(spec).graph == gen(spec).graph


def test_gen_families():
    assert gen(InstanceSpec("grid", {"rows": 3, "cols": 5})).graph.n == 15
    assert gen(InstanceSpec("cycle", {"n": 7})).graph.m == 7
    assert gen(InstanceSpec("tree", {"n": 9}, 1)).graph.m == 8
    inst = gen(InstanceSpec("gadget", {"k": 4, "length": 5}))
    assert inst.pairs.k == 4
    with pytest.raises(ValueError):
        gen(InstanceSpec("hypercube", {}))
    with pytest.raises(GraphError):
        gadget(0, 3)


def test_sample_connectable_pairs():
    t = random_tree(20, 0)
    pairs, pp, count = sample_connectable_pairs(t, 1, 0)
    assert count == 1 and pp.k == 1
    c = cycle(12)
    pairs, pp, count = sample_connectable_pairs(c, 2, 0)
    assert count == 2
    PartPaths(c, list(pp))
    for seed in range(5):
        pairs, pp, count = sample_connectable_pairs(grid(8), 10, seed)
        assert count == pp.k == pairs.k <= 10
        PartPaths(grid(8), list(pp))


def test_grid_row_pairs():
    g, pp = grid_row_pairs(16, 16)
    assert pp.k == 16 and g == grid(16)


def test_random_partition_parts_are_connected():
    g = grid(10)
    for seed in range(10):
        parts = random_partition(g, 7, seed)
        assert parts.k == 7
        assert sum(len(p) for p in parts.parts) == g.n
        assert random_partition(g, 7, seed).parts == parts.parts
