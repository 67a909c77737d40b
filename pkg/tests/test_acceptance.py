"""Acceptance criteria, one test each.

Each test records a pass/fail line that is printed in the terminal summary.
"""

import itertools
import math
import time
from fractions import Fraction
from pathlib import Path

import networkx as nx
import numpy as np

from oracles import disj, kruskal
from shortcutlab import Graph
from shortcutlab import _kernels as K
from shortcutlab.cli import main
from shortcutlab.gadgets import (
    DisjointnessGadget,
    crown_from_pairs,
    crown_to_relaxed,
    family_gadget,
    graph_diameter,
    strictify,
    validate_crown,
    validate_relaxed,
    validate_strict,
)
from shortcutlab.graph import log2ceil
from shortcutlab.instances import gadget, grid, path_graph, random_graph, random_partition, random_tree
from shortcutlab.movingcut import MovingCut, distance, scale, search, validate
from shortcutlab.pairs import PairSet
from shortcutlab.routing import Demand, opt_h, sample_shortcuts
from shortcutlab.shortcut import bfs_oracle, lift_pairs_to_parts, measure_pair_shortcut, measure_shortcut
from shortcutlab.sim import SimConfig, run
from shortcutlab.sim.algorithms import (
    BFSFlood,
    boruvka_mst,
    distributed_partwise_construction,
    partwise_aggregate,
    verify_spanning_connected,
)
from shortcutlab.sim.twoparty import disjointness_layers, extract_two_party_protocol

PLAN = Path(__file__).resolve().parent.parent / "plans" / "full.json"


def _random_pairs(g, k, rng):
    nodes = rng.permutation(g.n)[: 2 * k]
    return PairSet([(int(nodes[2 * i]), int(nodes[2 * i + 1])) for i in range(k)])


# ---------------------------------------------------------------- 1


def test_c01_exhaustive_disjointness(criterion):
    t0 = time.perf_counter()
    k = 8
    bits = np.array(list(itertools.product((0, 1), repeat=k)), np.bool_)
    xs = np.repeat(bits, len(bits), axis=0)
    ys = np.tile(bits, (len(bits), 1))
    truth = np.array([disj(x, y) for x, y in zip(xs.astype(int).tolist(), ys.astype(int).tolist())], np.bool_)
    mismatches = 0
    for length, hubs in ((3, "columns"), (4, "columns"), (6, "columns"), (5, "endpoints"), (8, "endpoints")):
        inst = gadget(k, length, hubs)
        g = inst.graph
        layers = disjointness_layers(g, family_gadget(inst))
        # spot-check the mask builder against the batch encoding
        for x, y in ((bits[3], bits[200]), (bits[0], bits[255])):
            h = layers.instance(x.astype(int), y.astype(int))
            assert h[layers.first].tolist() == (~x).tolist() and h[layers.last].tolist() == (~y).tolist()
        base = g.edges[layers.fixed]
        gated = np.vstack([g.edges[layers.first], g.edges[layers.last]])
        masks = np.hstack([~xs, ~ys])
        conn = K.connectivity_batch(g.n, base, gated, masks)
        mismatches += int((conn != truth).sum())
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    criterion(1, ok, f"mismatches={mismatches} over 5x65536 inputs, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 2


def test_c02_scaling_bounds(criterion):
    rng = np.random.default_rng(2)
    violations = 0
    for case in range(200):
        g = random_graph(int(rng.integers(5, 30)), 0.3, case % 50)
        mc = MovingCut(g, rng.integers(1, 12, g.m))
        s = _random_pairs(g, int(rng.integers(1, max(2, g.n // 2))), rng)
        c = Fraction(int(rng.integers(1, 40)), int(rng.integers(1, 10)))
        c = max(c, Fraction(1))
        gamma, beta = mc.capacity, distance(g, mc, s)
        sc = scale(mc, c)
        violations += sc.capacity * c > gamma
        violations += distance(g, sc, s) * (1 + c) < beta
    criterion(2, violations == 0, f"violations={violations} over 200 cases")
    assert violations == 0


# ---------------------------------------------------------------- 3


def test_c03_two_party_accounting(criterion):
    violations = checked = 0
    for trace, g, mc, s, beta, k in _cases3():
        if not validate(g, mc, s, k, beta).ok:
            violations += 1
            continue
        rounds = min(trace.rounds, distance(g, mc, s) // 2)
        try:
            rep = extract_two_party_protocol(trace, g, mc, s, rounds=rounds)
        except AssertionError:
            violations += 1
            continue
        checked += 1
        violations += any(c > mc.lengths[e] - 1 for (e, _), c in rep.active_rounds.items())
        violations += rep.total_bits > 2 * trace.bandwidth * mc.capacity
    ok = violations == 0 and checked > 0
    criterion(3, ok, f"violations={violations} over {checked} replays")
    assert ok


def _cases3():
    g = path_graph(10)
    ell = np.ones(g.m, np.int64)
    ell[g.edge_id(4, 5)] = 9
    yield run(g, SimConfig.for_graph(g), BFSFlood(0)), g, MovingCut(g, ell), PairSet([(0, 9)]), 17, 9
    for length, hubs in ((8, "endpoints"), (10, "columns")):
        inst = gadget(6, length, hubs)
        g = inst.graph
        layers = disjointness_layers(g, family_gadget(inst))
        res = search(g, inst.pairs, "lp", k=6)
        rng = np.random.default_rng(length)
        for seed in range(6):
            x, y = rng.integers(0, 2, 6), rng.integers(0, 2, 6)
            v = verify_spanning_connected(g, SimConfig.for_graph(g, seed=seed), layers.instance(x, y))
            yield v.trace, g, res.cut, inst.pairs, res.beta, 6
    for seed in range(12):
        g = random_graph(40, 0.08, seed)
        rng = np.random.default_rng(seed)
        s = _random_pairs(g, 4, rng)
        res = search(g, s, "lp", k=8)
        cfg = SimConfig.for_graph(g, seed=seed)
        yield boruvka_mst(g, cfg, rng.permutation(g.m) + 1).trace, g, res.cut, s, res.beta, 8
        parts = random_partition(g, 5, seed)
        vals = rng.integers(0, 50, g.n).tolist()
        yield partwise_aggregate(g, cfg, parts, None, vals, "sum").trace, g, res.cut, s, res.beta, 8


# ---------------------------------------------------------------- 4 and 5


_LARGE = {}


def _large_gadget():
    if not _LARGE:
        t0 = time.perf_counter()
        inst = gadget(2000, 200)
        g = inst.graph
        d = graph_diameter(g)
        crown = crown_from_pairs(g, inst.pairs, inst.paths, d)
        relaxed = crown_to_relaxed(g, crown, d=d)
        _LARGE.update(inst=inst, g=g, d=d, crown=crown, relaxed=relaxed, seconds=time.perf_counter() - t0)
    return _LARGE


def test_c04_crown_constants(criterion):
    x = _large_gadget()
    g, d, crown, relaxed = x["g"], x["d"], x["crown"], x["relaxed"]
    crown_ok = validate_crown(g, crown.paths, crown, d).ok
    relaxed_ok = validate_relaxed(g, relaxed, d).ok
    u, p = len(crown.U), len(relaxed.paths)
    ok = u >= math.ceil(2000 / 280) and p >= math.ceil(2000 / 1400) and crown_ok and relaxed_ok and x["seconds"] < 300
    criterion(4, ok, f"|U|={u} |P|={p} validators={crown_ok and relaxed_ok} {x['seconds']:.0f}s")
    assert ok


def test_c05_strict_gadget(criterion):
    x = _large_gadget()
    g, d, inst = x["g"], x["d"], x["inst"]
    res = search(g, inst.pairs, "lp")
    cut_ok = validate(g, res.cut, inst.pairs, res.k, res.beta).ok
    sg = strictify(g, x["relaxed"], res.cut, res.beta, d)
    assert isinstance(sg, DisjointnessGadget)
    rep = validate_strict(g, sg)
    ok = cut_ok and res.beta >= 9 * d and rep.ok
    criterion(5, ok, f"beta={res.beta} 9D={9 * d} |P|={len(sg.paths)} gamma={sg.cut.capacity} {rep.reason or 'valid'}")
    assert ok


# ---------------------------------------------------------------- 6


def _atlas_connected(max_nodes):
    for h in nx.graph_atlas_g():
        if 2 <= h.number_of_nodes() <= max_nodes and nx.is_connected(h):
            yield Graph(h.number_of_nodes(), list(h.edges()))


def test_c06_search_soundness(criterion):
    violations = cases = 0
    for g in _atlas_connected(6):
        for a, b in itertools.combinations(range(g.n), 2):
            s = PairSet([(a, b)])
            ex = search(g, s, "exact", lmax=3)
            lp = search(g, s, "lp")
            cases += 1
            violations += ex.beta < lp.beta
            violations += not validate(g, ex.cut, s, ex.k, ex.beta).ok
            violations += not validate(g, lp.cut, s, lp.k, lp.beta).ok
    criterion(6, violations == 0, f"violations={violations} over {cases} (graph, pair) cases")
    assert violations == 0


# ---------------------------------------------------------------- 7


def test_c07_aggregation_and_mst(criterion):
    rng = np.random.default_rng(7)
    bad = {"weight": 0, "aggregate": 0, "rounds": 0}
    for case in range(100):
        n = int(rng.integers(4, 65))
        g = random_graph(n, min(1.0, 4.0 / n), case)
        L = log2ceil(g.n)
        cfg = SimConfig.for_graph(g, seed=case)
        w = rng.integers(1, 20, g.m)
        mst = boruvka_mst(g, cfg, w)
        bad["weight"] += mst.weight != int(w[kruskal(g, w)].sum())
        q = max(x.Q for x in mst.qualities)
        bad["rounds"] += mst.rounds > 32 * q * L * L
        parts = random_partition(g, int(rng.integers(1, max(2, g.n // 4))), case)
        sc = lift_pairs_to_parts(g, parts, bfs_oracle(g)).shortcut if case % 2 else None
        vals = rng.integers(0, 1000, g.n).tolist()
        op = ("min", "max", "sum")[case % 3]
        f = {"min": min, "max": max, "sum": sum}[op]
        agg = partwise_aggregate(g, cfg, parts, sc, vals, op)
        bad["aggregate"] += any(agg.outputs[v] != f(vals[u] for u in parts.parts[parts.part_of[v]]) for v in range(g.n))
        bad["rounds"] += agg.rounds > 32 * agg.quality.Q * L * L
    ok = not any(bad.values())
    criterion(7, ok, " ".join(f"{k}_violations={v}" for k, v in bad.items()) + " over 100 graphs")
    assert ok


# ---------------------------------------------------------------- 8


def test_c08_distributed_construction(criterion):
    g = grid(16)
    L = log2ceil(g.n)
    runs = within = invalid = 0
    rates = []
    for p in range(10):
        parts = random_partition(g, 10, 100 + p)
        for seed in range(20):
            res = distributed_partwise_construction(g, SimConfig.for_graph(g, seed=seed), parts)
            runs += 1
            within += res.phases <= 6 * L
            rates.extend(res.merge_rates)
            invalid += res.quality != measure_shortcut(g, parts, res.shortcut)
            invalid += any(set(t) != set(q) for t, q in zip(res.trees, parts.parts))
    frac, mean = within / runs, float(np.mean(rates))
    ok = invalid == 0 and frac >= 0.95 and mean >= 0.25 - 0.1
    criterion(8, ok, f"invalid={invalid} within_phase_cap={frac:.2f} mean_merge_rate={mean:.3f}")
    assert ok


# ---------------------------------------------------------------- 9


def test_c09_heavy_light_lifting(criterion):
    rng = np.random.default_rng(9)
    violations = cases = 0
    graphs = [random_tree(int(rng.integers(8, 257)), s) for s in range(15)]
    graphs += [grid(r, int(rng.integers(2, 17))) for r in range(2, 17)]
    for i, g in enumerate(graphs):
        for k in (1, 4, 12):
            parts = random_partition(g, min(k, g.n), i)
            rep = lift_pairs_to_parts(g, parts, bfs_oracle(g))
            # a pair instance with any non-trivial pair has quality >= 1, even
            # when every light path is a single edge and the oracle is never asked
            floor = int(any(len(p) > 1 for p in parts.parts))
            q = max([floor] + [x.Q for x in rep.oracle_qualities])
            Q = measure_shortcut(g, parts, rep.shortcut).Q
            cases += 1
            violations += Q > 4 * q * math.log2(g.n) ** 2
    criterion(9, violations == 0, f"violations={violations} over {cases} (graph, partition) cases")
    assert violations == 0


# ---------------------------------------------------------------- 10


def test_c10_routing_sampling(criterion):
    g = grid(8)
    L = log2ceil(g.n)
    dil_bad = cong_ok = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        s = _random_pairs(g, 16, rng)
        res = opt_h(g, Demand.unit(list(s)), 14)
        alpha = res.value / res.lower_bound
        Q = math.ceil(res.lower_bound - 1e-9)
        ps = sample_shortcuts(res.scheme, s, seed)
        q = measure_pair_shortcut(g, s, ps)
        dil_bad += q.d > res.scheme.dilation
        cong_ok += q.c <= 4 * L * alpha * Q
    ok = dil_bad == 0 and cong_ok >= 95
    criterion(10, ok, f"dilation_violations={dil_bad} congestion_within_bound={cong_ok}/100")
    assert ok


# ---------------------------------------------------------------- 11


def test_c11_plan_determinism(criterion, tmp_path):
    codes = [main(["plan", "--plan", str(PLAN), "--seed", "11", "--out-dir", str(tmp_path / r)]) for r in ("a", "b")]
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv") if not p.name.endswith(".walltime.csv"))
    differ = [str(f) for f in files if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    ok = codes == [0, 0] and files and not differ
    criterion(11, ok, f"{len(files)} csv files compared, {len(differ)} differ, exit codes {codes}")
    assert ok
