"""Deterministic generators for graph families, pair sets and partitions."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels as K
from .errors import GraphError
from .graph import Graph, component_labels
from .pairs import PairSet, PartPaths
from .shortcut import Partition

FAMILIES = ("cycle", "grid", "tree", "random", "gadget", "path", "star")


@dataclass
class InstanceSpec:
    family: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0


@dataclass
class Instance:
    graph: Graph
    pairs: PairSet | None = None
    paths: PartPaths | None = None
    partition: Partition | None = None
    meta: dict[str, Any] = field(default_factory=dict)


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise GraphError(msg)


def cycle(n: int) -> Graph:
    _need(n >= 3, "cycle needs n >= 3")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    _need(n >= 1, "path needs n >= 1")
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def star(leaves: int) -> Graph:
    _need(leaves >= 1, "star needs at least one leaf")
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def grid(rows: int, cols: int | None = None) -> Graph:
    cols = rows if cols is None else cols
    _need(rows >= 1 and cols >= 1 and rows * cols >= 1, "grid needs positive sides")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph(rows * cols, edges)


def random_tree(n: int, seed: int = 0) -> Graph:
    """Uniform random recursive tree: node v attaches to a uniform earlier node."""
    _need(n >= 1, "tree needs n >= 1")
    rng = np.random.default_rng(seed)
    parents = [int(rng.integers(0, v)) for v in range(1, n)]
    return Graph(n, [(p, v) for v, p in zip(range(1, n), parents)])


def random_graph(n: int, p: float, seed: int = 0, max_tries: int = 1000) -> Graph:
    """G(n, p) conditioned on connectivity by rejection."""
    _need(n >= 1 and 0 < p <= 1, "random graph needs n >= 1 and 0 < p <= 1")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    for _ in range(max_tries):
        keep = rng.random(len(iu[0])) < p
        edges = np.column_stack([iu[0][keep], iu[1][keep]])
        if n == 1 or (component_labels(n, edges).max() == 0):
            return Graph(n, edges)
    raise GraphError(f"no connected G({n}, {p}) sample in {max_tries} tries")


def balanced_tree_edges(nodes: list[int]) -> list[tuple[int, int]]:
    """Balanced binary search tree over ``nodes`` in list order.

    The root is the middle element and each half recurses, so tree distance
    between positions i and j grows with log|i - j| rather than jumping
    between far-apart positions.
    """
    out: list[tuple[int, int]] = []
    stack = [(0, len(nodes), -1)]
    while stack:
        lo, hi, parent = stack.pop()
        if lo >= hi:
            continue
        mid = (lo + hi) // 2
        if parent >= 0:
            out.append((nodes[parent], nodes[mid]))
        stack.append((mid + 1, hi, mid))
        stack.append((lo, mid, mid))
    return out


def gadget(k: int, length: int, hubs: str = "columns") -> Instance:
    """k horizontal paths of ``length`` edges joined by a binary tree.

    Path i occupies nodes ``i*(length+1) .. i*(length+1)+length`` left to
    right; s_i is its left end and t_i its right end.

    ``hubs="columns"`` adds one hub per column, adjacent to that column's
    node on every path, and hangs a balanced binary tree on the hubs.  Hub 0
    touches every s_i and the last hub every t_i, so the tree spans all
    endpoints while the diameter stays logarithmic in the length.

    ``hubs="endpoints"`` instead takes the 2k endpoints as leaves of a
    balanced binary tree of depth ceil(log2 2k) on fresh internal nodes; the
    path middles are then about length/2 hops from the tree.
    """
    _need(k >= 1 and length >= 1, "gadget needs k >= 1 and length >= 1")
    width = length + 1
    base = k * width
    edges = []
    paths = []
    for i in range(k):
        row = list(range(i * width, (i + 1) * width))
        paths.append(row)
        edges.extend(zip(row, row[1:]))
    if hubs == "columns":
        hub = [base + c for c in range(width)]
        for c in range(width):
            edges.extend((i * width + c, hub[c]) for i in range(k))
        edges.extend(balanced_tree_edges(hub))
        n = base + width
        tree = [(hub[0], p[0]) for p in paths] + [(hub[-1], p[-1]) for p in paths]
        tree += _tree_path(balanced_tree_edges(hub), hub[0], hub[-1])
    elif hubs == "endpoints":
        leaves = [p[0] for p in paths] + [p[-1] for p in paths]
        depth = math.ceil(math.log2(len(leaves))) if len(leaves) > 1 else 0
        nxt = base
        level = leaves
        tree = []
        for _ in range(depth):
            parents = []
            for j in range(0, len(level), 2):
                parent = nxt
                nxt += 1
                parents.append(parent)
                tree.extend((parent, c) for c in level[j : j + 2])
            level = parents
        n = nxt
        edges.extend(tree)
    else:
        raise ValueError(f"unknown hub layout {hubs!r}")
    g = Graph(n, edges)
    pp = PartPaths(g, paths)
    return Instance(
        g,
        pp.pairs,
        pp,
        Partition(g, paths),
        {"family": "gadget", "k": k, "length": length, "hubs": hubs, "tree_edges": sorted(set(map(_sorted, tree)))},
    )


def _sorted(e):
    return (min(e), max(e))


def _tree_path(tree_edges, a, b) -> list[tuple[int, int]]:
    adj: dict[int, list[int]] = {}
    for u, v in tree_edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    parent = {a: None}
    q = deque([a])
    while q:
        v = q.popleft()
        for u in adj.get(v, []):
            if u not in parent:
                parent[u] = v
                q.append(u)
    out = []
    v = b
    while parent[v] is not None:
        out.append((parent[v], v))
        v = parent[v]
    return out


def gen(spec: InstanceSpec) -> Instance:
    p = spec.params
    fam = spec.family
    if fam == "cycle":
        return Instance(cycle(int(p["n"])), meta={"family": fam})
    if fam == "path":
        return Instance(path_graph(int(p["n"])), meta={"family": fam})
    if fam == "star":
        return Instance(star(int(p["leaves"])), meta={"family": fam})
    if fam == "grid":
        return Instance(grid(int(p["rows"]), int(p.get("cols", p["rows"]))), meta={"family": fam})
    if fam == "tree":
        return Instance(random_tree(int(p["n"]), spec.seed), meta={"family": fam})
    if fam == "random":
        return Instance(random_graph(int(p["n"]), float(p["p"]), spec.seed), meta={"family": fam})
    if fam == "gadget":
        return gadget(int(p["k"]), int(p["length"]), p.get("hubs", "columns"))
    raise ValueError(f"unknown family {fam!r}; choose from {', '.join(FAMILIES)}")


# ---------------------------------------------------------------- samplers


def sample_connectable_pairs(g: Graph, k: int, seed: int = 0, attempts: int | None = None) -> tuple[PairSet, PartPaths | None, int]:
    """Greedy randomized packing of vertex-disjoint paths.

    Repeatedly picks a random pair of unused nodes and joins them by a BFS
    path through unused nodes.  Returns the pairs found (at most k), their
    witness paths and the count.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    used = np.zeros(g.n, np.bool_)
    paths: list[list[int]] = []
    attempts = attempts if attempts is not None else 50 * k + 100
    for _ in range(attempts):
        if len(paths) >= k:
            break
        free = np.flatnonzero(~used)
        if len(free) < 2:
            break
        s, t = (int(x) for x in rng.choice(free, 2, replace=False))
        dist, parent = K.bfs(g.indptr, g.indices, [s], ~used, parents=True)
        if dist[t] < 0:
            continue
        path = [t]
        while path[-1] != s:
            path.append(int(parent[path[-1]]))
        path.reverse()
        used[path] = True
        paths.append(path)
    if not paths:
        return PairSet([]), None, 0
    pp = PartPaths(g, paths)
    return pp.pairs, pp, len(paths)


def grid_row_pairs(rows: int, cols: int) -> tuple[Graph, PartPaths]:
    g = grid(rows, cols)
    return g, PartPaths(g, [list(range(r * cols, (r + 1) * cols)) for r in range(rows)])


def random_partition(g: Graph, k: int, seed: int = 0, cover: bool = True) -> Partition:
    """k connected parts grown by randomized simultaneous BFS from random seeds."""
    rng = np.random.default_rng(seed)
    k = min(k, g.n)
    seeds = rng.choice(g.n, k, replace=False)
    owner = np.full(g.n, -1, np.int64)
    owner[seeds] = np.arange(k)
    frontier = [[int(s)] for s in seeds]
    active = True
    while active:
        active = False
        for i in rng.permutation(k).tolist():
            nxt = []
            for v in frontier[i]:
                nb = g.neighbors(v)
                for u in nb[rng.permutation(len(nb))].tolist():
                    if owner[u] < 0 and rng.random() < 0.7:
                        owner[u] = i
                        nxt.append(u)
                    elif owner[u] < 0:
                        nxt.append(v)
            frontier[i] = list(dict.fromkeys(nxt))
            active = active or bool(frontier[i])
    parts = [np.flatnonzero(owner == i).tolist() for i in range(k)]
    if not cover:
        parts = [p for p in parts if p]
    return Partition(g, parts)
