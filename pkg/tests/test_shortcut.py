import math

import numpy as np
import pytest

from oracles import measure_parts, measure_paths
from shortcutlab import Graph, GraphError, ValidationError
from shortcutlab.graph import bfs_path
from shortcutlab.instances import cycle, gadget, grid, grid_row_pairs, path_graph, random_graph, random_partition, random_tree, star
from shortcutlab.pairs import PairSet, PartPaths, read_pairs, write_pairs
from shortcutlab.shortcut import (
    PairShortcut,
    Partition,
    Shortcut,
    bfs_oracle,
    lift_pairs_to_parts,
    measure_pair_shortcut,
    measure_shortcut,
    mst_quality_reduction_check,
    pairs_from_part_shortcut,
    partition_from_paths,
    quality_interval,
    read_partition,
    read_shortcut,
    write_partition,
    write_shortcut,
)


def test_partition_rejects_overlap_and_disconnected_parts():
    g = path_graph(4)
    with pytest.raises(GraphError, match="overlaps"):
        Partition(g, [[0, 1], [1, 2]])
    with pytest.raises(GraphError, match="connected"):
        Partition(g, [[0, 2]])


def test_part_paths_invariants():
    g = grid(3)
    with pytest.raises(ValidationError, match="share"):
        PartPaths(g, [[0, 1, 2], [2, 5]])
    with pytest.raises(ValidationError, match="non-edge"):
        PartPaths(g, [[0, 2]])
    pp = PartPaths(g, [[0, 1, 2], [3, 4, 5]])
    assert list(pp.pairs) == [(0, 2), (3, 5)]


def test_measure_shortcut_examples():
    g = cycle(10)
    single = Partition(g, [[v] for v in range(g.n)])
    q = measure_shortcut(g, single, Shortcut.empty(g.n))
    assert (q.c, q.d, q.Q) == (0, 0, 0)
    whole = Partition(g, [range(g.n)])
    q = measure_shortcut(g, whole, Shortcut.empty(1))
    assert (q.c, q.d) == (0, 5)
    c4 = cycle(4)
    parts = Partition(c4, [[0, 1], [2, 3]])
    sc = Shortcut([c4.edge_ids([(1, 2), (2, 3), (3, 0)]), c4.edge_ids([(3, 0), (0, 1), (1, 2)])])
    q = measure_shortcut(c4, parts, sc)
    assert (q.c, q.d, q.Q) == (2, 1, 3)
    sc = Shortcut([c4.edge_ids([(2, 3)]), c4.edge_ids([(0, 1)])])
    q = measure_shortcut(c4, parts, sc)
    assert (q.c, q.d, q.Q) == (1, 1, 2)


def test_measure_shortcut_matches_definition(rng):
    for seed in range(30):
        g = random_graph(8, 0.35, seed)
        parts = random_partition(g, 3, seed)
        sets = [np.flatnonzero(rng.random(g.m) < 0.3) for _ in range(parts.k)]
        q = measure_shortcut(g, parts, Shortcut(sets))
        assert (q.c, q.d) == measure_parts(g, parts.parts, sets)


def test_measure_pair_shortcut_examples():
    g = path_graph(6)
    s = PairSet([(0, 5)])
    q = measure_pair_shortcut(g, s, PairShortcut([list(range(6))]))
    assert (q.c, q.d) == (1, 5)
    s3 = PairSet([(0, 5)] * 3)
    assert measure_pair_shortcut(g, s3, PairShortcut([list(range(6))] * 3)).c == 3
    g, pp = grid_row_pairs(4, 4)
    q = measure_pair_shortcut(g, pp.pairs, PairShortcut([list(p) for p in pp]))
    assert (q.c, q.d, q.Q) == (1, 3, 4)


def test_measure_pair_shortcut_matches_definition(rng):
    for seed in range(20):
        g = random_graph(10, 0.3, seed)
        pairs = PairSet([tuple(rng.choice(g.n, 2, replace=False)) for _ in range(4)])
        paths = [bfs_path(g, s, t) for s, t in pairs]
        q = measure_pair_shortcut(g, pairs, PairShortcut(paths))
        assert (q.c, q.d) == measure_paths(g, paths)


def test_pair_shortcut_endpoints_checked():
    g = path_graph(4)
    with pytest.raises(ValidationError):
        measure_pair_shortcut(g, PairSet([(0, 3)]), PairShortcut([[0, 1, 2]]))


def test_part_to_pair_conversion_never_worse():
    for seed in range(10):
        g = grid(6)
        pairs, pp, _ = _connectable(g, seed)
        parts = partition_from_paths(g, list(pp))
        sc = Shortcut([np.flatnonzero(np.random.default_rng(seed + i).random(g.m) < 0.1) for i in range(parts.k)])
        qp = measure_shortcut(g, parts, sc)
        ps = pairs_from_part_shortcut(g, parts, sc, pairs)
        assert measure_pair_shortcut(g, pairs, ps).Q <= qp.Q + 1


def _connectable(g, seed):
    from shortcutlab.instances import sample_connectable_pairs

    return sample_connectable_pairs(g, 4, seed)


def test_lift_path_of_power_of_two():
    k = 6
    g = path_graph(2**k)
    parts = Partition(g, [range(g.n)])
    rep = lift_pairs_to_parts(g, parts, bfs_oracle(g))
    q_or = max(q.Q for q in rep.oracle_qualities)
    assert measure_shortcut(g, parts, rep.shortcut).d <= 2 * k * q_or


def test_lift_literal_congestion_count():
    for seed in range(5):
        g = random_tree(120, seed)
        parts = random_partition(g, 6, seed)
        rep = lift_pairs_to_parts(g, parts, bfs_oracle(g))
        q = measure_shortcut(g, parts, rep.shortcut)
        assert q.c <= rep.congestion_budget * max(1, rep.hl_levels)


def test_lift_bound_on_trees_and_grids():
    for seed in range(6):
        for g in (random_tree(200, seed), grid(12)):
            parts = random_partition(g, 8, seed)
            rep = lift_pairs_to_parts(g, parts, bfs_oracle(g))
            q = max((x.Q for x in rep.oracle_qualities), default=0)
            assert measure_shortcut(g, parts, rep.shortcut).Q <= 4 * q * math.log2(g.n) ** 2


def test_quality_interval_examples():
    g = cycle(12)
    qi = quality_interval(g, Partition(g, [range(12)]), budget=100)
    assert qi.lower <= 6 <= qi.upper
    s = star(6)
    qi = quality_interval(s, Partition(s, [[v] for v in range(s.n)]), budget=100)
    assert (qi.lower, qi.upper) == (0, 0)


def test_quality_interval_brackets_exhaustive_optimum():
    """Exhaustive over per-pair path choices on a small gadget miniature."""
    import itertools

    import networkx as nx

    from oracles import to_nx

    inst = gadget(3, 4)
    g = inst.graph
    pairs = inst.pairs
    h = to_nx(g)
    options = []
    for s, t in pairs:
        paths = sorted(nx.all_simple_paths(h, s, t, cutoff=6), key=len)
        options.append(paths[:40])
    best = min(sum(measure_paths(g, combo)) for combo in itertools.product(*options))
    qi = quality_interval(g, pairs, budget=200)
    assert qi.lower <= best <= qi.upper


def test_mst_quality_reduction_check():
    g = random_graph(20, 0.3, 1)
    assert mst_quality_reduction_check(g, np.arange(1, g.m + 1))
    assert mst_quality_reduction_check(g, np.ones(g.m, np.int64))


def test_files_round_trip(tmp_path):
    g = grid(4)
    parts = random_partition(g, 3, 0)
    write_partition(parts, tmp_path / "p.txt")
    back = read_partition(g, tmp_path / "p.txt")
    assert back.parts == parts.parts
    sc = Shortcut([g.edge_ids([(0, 1)]), [], g.edge_ids([(14, 15), (0, 4)])])
    write_shortcut(g, sc, tmp_path / "s.txt")
    back = read_shortcut(g, 3, tmp_path / "s.txt")
    assert [sorted(x.tolist()) for x in back.edge_sets] == [sorted(np.asarray(x).tolist()) for x in sc.edge_sets]
    pairs = PairSet([(0, 3), (4, 7)])
    write_pairs(tmp_path / "pairs.txt", pairs, [[0, 1, 2, 3], [4, 5, 6, 7]])
    p2, paths = read_pairs(tmp_path / "pairs.txt")
    assert list(p2) == list(pairs) and paths == [[0, 1, 2, 3], [4, 5, 6, 7]]


def test_graph_used_for_sanity():
    assert Graph(2, [(0, 1)]).m == 1
