"""Partitions, part-wise and pair-wise shortcuts, and their exact measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import GraphError, ValidationError
from .graph import Graph, bfs_path, bfs_tree, component_labels, csr_from_edges, heavy_light, walk_edges
from .pairs import PairSet

PairOracle = Callable[[PairSet], "PairShortcut"]


@dataclass(frozen=True)
class Quality:
    c: int
    d: int

    @property
    def Q(self) -> int:
        return self.c + self.d


class Partition:
    """Disjoint node sets, each inducing a connected subgraph."""

    __slots__ = ("parts", "part_of")

    def __init__(self, g: Graph, parts: Iterable[Iterable[int]]):
        self.parts = tuple(tuple(sorted(set(int(v) for v in p))) for p in parts)
        part_of = np.full(g.n, -1, np.int64)
        for i, p in enumerate(self.parts):
            if not p:
                raise GraphError(f"part {i} is empty")
            idx = np.asarray(p, np.int64)
            if idx.min() < 0 or idx.max() >= g.n:
                raise GraphError(f"part {i} names a node outside the graph")
            if np.any(part_of[idx] >= 0):
                raise GraphError(f"part {i} overlaps part {int(part_of[idx][part_of[idx] >= 0][0])}")
            part_of[idx] = i
        self.part_of = part_of
        inside = induced_edge_mask(g, part_of)
        comp = component_labels(g.n, g.edges[inside])
        for i, p in enumerate(self.parts):
            if len(set(comp[list(p)].tolist())) != 1:
                raise GraphError(f"part {i} does not induce a connected subgraph")

    @property
    def k(self) -> int:
        return len(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)


def induced_edge_mask(g: Graph, part_of: np.ndarray) -> np.ndarray:
    a = part_of[g.edges[:, 0]]
    return (a >= 0) & (a == part_of[g.edges[:, 1]])


class Shortcut:
    """Per-part edge sets H_1..H_k, stored as sorted edge-id arrays."""

    __slots__ = ("edge_sets",)

    def __init__(self, edge_sets: Iterable[Iterable[int]]):
        self.edge_sets = tuple(np.unique(np.asarray(list(h), np.int64)) for h in edge_sets)

    @classmethod
    def empty(cls, k: int) -> "Shortcut":
        return cls([[] for _ in range(k)])

    @classmethod
    def from_pairs(cls, g: Graph, edge_lists: Iterable[Iterable[Sequence[int]]]) -> "Shortcut":
        return cls(g.edge_ids(h) if h else [] for h in map(list, edge_lists))

    @property
    def k(self) -> int:
        return len(self.edge_sets)

    def union(self, other: "Shortcut") -> "Shortcut":
        return Shortcut(np.concatenate([a, b]) for a, b in zip(self.edge_sets, other.edge_sets))


@dataclass
class PairShortcut:
    """One path per pair; path i must join (s_i, t_i)."""

    paths: list[list[int]]

    @property
    def k(self) -> int:
        return len(self.paths)


def edge_load(g: Graph, sc: Shortcut) -> np.ndarray:
    if not sc.edge_sets:
        return np.zeros(g.m, np.int64)
    return np.bincount(np.concatenate(sc.edge_sets), minlength=g.m)


def _part_dilation(g: Graph, nodes: Sequence[int], extra: np.ndarray, inside_ids: np.ndarray) -> int:
    eids = np.union1d(inside_ids, extra)
    ends = g.edges[eids]
    local = np.unique(np.concatenate([np.asarray(nodes, np.int64), ends.ravel()]))
    ledges = np.searchsorted(local, ends)
    indptr, indices, _ = csr_from_edges(len(local), ledges)
    d = K.set_eccentricity(indptr, indices, np.searchsorted(local, np.asarray(nodes, np.int64)))
    if d < 0:
        raise ValidationError("disconnected part augmentation")
    return d


def measure_shortcut(g: Graph, parts: Partition, sc: Shortcut) -> Quality:
    """Exact congestion and dilation of a part-wise shortcut."""
    if sc.k != parts.k:
        raise ValidationError(f"shortcut has {sc.k} edge sets for {parts.k} parts")
    for i, h in enumerate(sc.edge_sets):
        if h.size and (h[0] < 0 or h[-1] >= g.m):
            raise ValidationError(f"H_{i} names an edge id outside the graph")
    c = int(edge_load(g, sc).max(initial=0))
    inside = induced_edge_mask(g, parts.part_of)
    owner = np.where(inside, parts.part_of[g.edges[:, 0]], -1)
    order = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[order], np.arange(parts.k + 1))
    d = 0
    for i, p in enumerate(parts.parts):
        if len(p) <= 1:
            continue
        d = max(d, _part_dilation(g, p, sc.edge_sets[i], order[bounds[i] : bounds[i + 1]]))
    return Quality(c, d)


def validate_pair_shortcut(g: Graph, pairs: PairSet, ps: PairShortcut) -> None:
    if ps.k != pairs.k:
        raise ValidationError(f"{ps.k} paths for {pairs.k} pairs")
    for i, ((s, t), p) in enumerate(zip(pairs, ps.paths)):
        if not p or p[0] != s or p[-1] != t:
            raise ValidationError(f"path {i} does not join ({s}, {t})")
        for a, b in zip(p, p[1:]):
            if not g.has_edge(a, b):
                raise ValidationError(f"path {i} uses non-edge {{{a},{b}}}")


def pair_edge_load(g: Graph, paths: Iterable[Sequence[int]]) -> np.ndarray:
    ids = [np.unique(g.edge_ids(walk_edges(p))) for p in paths if len(p) > 1]
    if not ids:
        return np.zeros(g.m, np.int64)
    return np.bincount(np.concatenate(ids), minlength=g.m)


def measure_pair_shortcut(g: Graph, pairs: PairSet, ps: PairShortcut) -> Quality:
    validate_pair_shortcut(g, pairs, ps)
    c = int(pair_edge_load(g, ps.paths).max(initial=0))
    d = max((len(p) - 1 for p in ps.paths), default=0)
    return Quality(c, d)


# ---------------------------------------------------------------- oracles and conversions


def bfs_oracle(g: Graph) -> PairOracle:
    """Pairwise oracle returning a lowest-id BFS shortest path per pair."""

    def oracle(pairs: PairSet) -> PairShortcut:
        return PairShortcut([bfs_path(g, s, t) for s, t in pairs])

    return oracle


def pairs_from_part_shortcut(g: Graph, parts: Partition, sc: Shortcut, pairs: PairSet) -> PairShortcut:
    """Route each pair inside G[P_i] + H_i of the part holding both endpoints."""
    inside = induced_edge_mask(g, parts.part_of)
    paths = []
    for s, t in pairs:
        i = int(parts.part_of[s])
        if i < 0 or parts.part_of[t] != i:
            raise ValidationError(f"pair ({s}, {t}) is not inside a single part")
        eids = np.union1d(np.flatnonzero(inside & (parts.part_of[g.edges[:, 0]] == i)), sc.edge_sets[i])
        ends = g.edges[eids]
        local = np.unique(np.concatenate([[s, t], ends.ravel()]))
        indptr, indices, _ = csr_from_edges(len(local), np.searchsorted(local, ends))
        ls, lt = np.searchsorted(local, [s, t])
        dist, parent = K.bfs(indptr, indices, [ls], parents=True)
        if dist[lt] < 0:
            raise ValidationError("disconnected part augmentation")
        walk = [int(lt)]
        while walk[-1] != ls:
            walk.append(int(parent[walk[-1]]))
        paths.append([int(local[x]) for x in reversed(walk)])
    return PairShortcut(paths)


def partition_from_paths(g: Graph, paths: Sequence[Sequence[int]]) -> Partition:
    return Partition(g, paths)


# ---------------------------------------------------------------- lifting


@dataclass
class LiftReport:
    shortcut: Shortcut
    levels: int
    hl_levels: int
    oracle_qualities: list[Quality] = field(default_factory=list)

    @property
    def congestion_budget(self) -> int:
        """Literal bound: each level's oracle congestion summed over levels."""
        return sum(q.c for q in self.oracle_qualities)


def _halvings(path: Sequence[int]) -> list[list[tuple[int, int, tuple[int, ...]]]]:
    """Per recursion level: (s, m) and (m, t) pairs together with their subpath."""
    levels: list[list[tuple[int, int, tuple[int, ...]]]] = []
    frontier = [tuple(path)]
    while frontier:
        here, nxt = [], []
        for p in frontier:
            if len(p) <= 2:
                continue
            mid = (len(p) - 1) // 2
            here.append((p[0], p[mid], p[: mid + 1]))
            here.append((p[mid], p[-1], p[mid:]))
            nxt.extend([p[: mid + 1], p[mid:]])
        if here:
            levels.append(here)
        frontier = nxt
    return levels


def lift_pairs_to_parts(
    g: Graph,
    parts: Partition,
    oracle: PairOracle,
    *,
    trees: Sequence[dict[int, int | None]] | None = None,
) -> LiftReport:
    """Build part shortcuts from pair shortcuts via heavy-light path halving.

    Every part gets a spanning tree (BFS from its lowest-id node unless
    ``trees`` is given), the tree is split into its light paths, and each
    path is recursively halved at its median.  The oracle is called once per
    recursion depth on every (first, median) and (median, last) pair at that
    depth, across all parts; the returned paths are added to the owning part.
    """
    if trees is None:
        trees = [bfs_tree(g, p, p[0]) for p in parts.parts]
    hl_levels = 0
    per_level: list[list[tuple[int, int, int]]] = []
    for i, tree in enumerate(trees):
        hl = heavy_light(tree)
        hl_levels = max(hl_levels, 1 + max(hl.heavy_depth.values()))
        for chain in hl.light_paths:
            for depth, items in enumerate(_halvings(chain)):
                while len(per_level) <= depth:
                    per_level.append([])
                per_level[depth].extend((s, t, i) for s, t, _ in items)
    sets: list[list[np.ndarray]] = [[] for _ in range(parts.k)]
    qualities = []
    for items in per_level:
        ps = PairSet((s, t) for s, t, _ in items)
        res = oracle(ps)
        qualities.append(measure_pair_shortcut(g, ps, res))
        for (_, _, i), path in zip(items, res.paths):
            if len(path) > 1:
                sets[i].append(g.edge_ids(walk_edges(path)))
    sc = Shortcut(np.concatenate(s) if s else [] for s in sets)
    return LiftReport(sc, len(per_level), hl_levels, qualities)


# ---------------------------------------------------------------- quality interval


@dataclass
class QualityInterval:
    lower: int
    upper: int
    lower_terms: dict
    upper_terms: dict
    witness: object = None


def _farthest_pair(g: Graph, nodes: Sequence[int]) -> tuple[int, int, int]:
    best = (nodes[0], nodes[0], 0)
    for s in nodes:
        d = K.bfs(g.indptr, g.indices, [s])
        t = max(nodes, key=lambda v: (d[v], -v))
        if d[t] > best[2]:
            best = (s, t, int(d[t]))
    return best


def _pair_lower(g: Graph, pairs: PairSet, budget: int, eps: float) -> tuple[int, dict]:
    from .routing import Demand, opt_h
    from .errors import Infeasible

    live = [(s, t) for s, t in pairs if s != t]
    if not live:
        return 0, {"hop": 0, "congestion": 0}
    hop = 0
    for s, t in live:
        hop = max(hop, int(K.bfs(g.indptr, g.indices, [s])[t]))
    demand = Demand.unit(live)
    best_cong = 0
    h_top = min(g.n - 1, 2 * hop + 8)
    profile = {}
    for h in range(hop, h_top + 1):
        try:
            res = opt_h(g, demand, h, eps=eps, max_iter=budget)
        except Infeasible:
            continue
        profile[h] = res.lower_bound
        best_cong = max(best_cong, min(h, math.ceil(res.lower_bound - 1e-9)))
        if res.lower_bound <= 1 + 1e-9:
            break
    return max(hop, best_cong), {"hop": hop, "congestion": best_cong, "opt_profile": profile}


def quality_interval(
    g: Graph,
    target: Partition | PairSet,
    *,
    budget: int = 2000,
    eps: float = 0.05,
    seeds: Iterable[int] = (0, 1, 2),
) -> QualityInterval:
    """Sound bracket [lower, upper] on the best shortcut quality for ``target``.

    For pairs, any shortcut of dilation d >= h has Q >= h and any of dilation
    d < h has congestion >= opt_d >= opt_h, so Q >= min(h, opt_h) for every h;
    the LP dual value certifies opt_h from below.  A part
    shortcut yields a pair shortcut with congestion at most one higher, so the
    part bound is the pair bound (farthest pair per part) minus one.
    """
    from .routing import baseline_scheme, routing_oracle, sample_shortcuts

    seeds = list(seeds)
    if isinstance(target, PairSet):
        lower, lterms = _pair_lower(g, target, budget, eps)
        cands = {}
        direct = bfs_oracle(g)(target)
        cands["bfs"] = (measure_pair_shortcut(g, target, direct).Q, direct)
        hop = lterms["hop"]
        if target.k and hop > 0:
            scheme = baseline_scheme(g, max(hop, 1), "mw-spread", pairs=target, max_iter=budget)
            for sd in seeds:
                ps = sample_shortcuts(scheme, target, sd)
                q = measure_pair_shortcut(g, target, ps).Q
                if "sampled" not in cands or q < cands["sampled"][0]:
                    cands["sampled"] = (q, ps)
        name = min(cands, key=lambda k: cands[k][0])
        upper = cands[name][0]
        return QualityInterval(lower, upper, lterms, {k: v[0] for k, v in cands.items()}, cands[name][1])

    parts = target
    far = [_farthest_pair(g, p) for p in parts.parts]
    hop = max((d for _, _, d in far), default=0)
    fpairs = PairSet((s, t) for s, t, d in far if d > 0)
    plow, pterms = _pair_lower(g, fpairs, budget, eps) if fpairs.k else (0, {})
    lower = max(hop, plow - 1)
    cands = {}
    empty = Shortcut.empty(parts.k)
    cands["empty"] = (measure_shortcut(g, parts, empty).Q, empty)
    lifted = lift_pairs_to_parts(g, parts, bfs_oracle(g)).shortcut
    cands["lift-bfs"] = (measure_shortcut(g, parts, lifted).Q, lifted)
    if hop > 0:
        for sd in seeds:
            sc = lift_pairs_to_parts(g, parts, routing_oracle(g, sd, max_iter=budget)).shortcut
            q = measure_shortcut(g, parts, sc).Q
            if "lift-sampled" not in cands or q < cands["lift-sampled"][0]:
                cands["lift-sampled"] = (q, sc)
    name = min(cands, key=lambda k: cands[k][0])
    upper = cands[name][0]
    lterms = {"hop": hop, "pair_bound": plow, **{f"pair_{k}": v for k, v in pterms.items()}}
    return QualityInterval(lower, upper, lterms, {k: v[0] for k, v in cands.items()}, cands[name][1])


def mst_quality_reduction_check(g: Graph, weights, shortcut_provider=None, seed: int = 0) -> bool:
    """Shortcut-based Boruvka reaches the reference MST weight."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import minimum_spanning_tree

    from .sim.algorithms import boruvka_mst
    from .sim.core import SimConfig

    w = np.asarray(weights, np.int64)
    if w.size and w.min() < 1:
        raise ValueError("weights must be positive")
    mat = coo_matrix((w.astype(float), (g.edges[:, 0], g.edges[:, 1])), shape=(g.n, g.n)).tocsr()
    ref = int(round(minimum_spanning_tree(mat).sum()))
    res = boruvka_mst(g, SimConfig.for_graph(g, seed=seed), w, shortcut_provider)
    return res.weight == ref


# ---------------------------------------------------------------- files


def read_partition(g: Graph, path: str | Path) -> Partition:
    groups: dict[int, list[int]] = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            i, v = map(int, line.split())
            groups.setdefault(i, []).append(v)
    if groups and sorted(groups) != list(range(len(groups))):
        raise GraphError("part indices must be 0..k-1")
    return Partition(g, [groups[i] for i in range(len(groups))])


def write_partition(parts: Partition, path: str | Path) -> None:
    Path(path).write_text("".join(f"{i} {v}\n" for i, p in enumerate(parts.parts) for v in p))


def read_shortcut(g: Graph, k: int, path: str | Path) -> Shortcut:
    sets: list[list[tuple[int, int]]] = [[] for _ in range(k)]
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            i, u, v = map(int, line.split())
            sets[i].append((u, v))
    return Shortcut(g.edge_ids(s) if s else [] for s in sets)


def write_shortcut(g: Graph, sc: Shortcut, path: str | Path) -> None:
    lines = []
    for i, h in enumerate(sc.edge_sets):
        for e in h.tolist():
            u, v = g.edge(e)
            lines.append(f"{i} {u} {v}\n")
    Path(path).write_text("".join(lines))
