"""Contraction graphs, crowns, relaxed gadgets and strict disjointness gadgets.

Every constructor here returns a structure that its matching ``validate_*``
function accepts; the pipeline re-validates after each step instead of
trusting the construction.

Edge sets (``T``) are sorted arrays of edge ids of the host graph.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import ClipUndefined, ConstructionShortfall, HypothesisViolated, ValidationError
from .graph import Graph, bfs_path, clip_walk, component_labels, csr_from_edges, diameter, diameter_bounds, project_walk
from .movingcut import SCALE_LADDER, MovingCut, scale, search
from .pairs import PairSet, PartPaths

log = logging.getLogger(__name__)

MIN_K = 9


# ---------------------------------------------------------------- structures


@dataclass
class Crown:
    T: np.ndarray
    A: frozenset
    U: frozenset
    paths: PartPaths | None = field(default=None, repr=False, compare=False)
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.T = np.unique(np.asarray(self.T, np.int64))
        self.A = frozenset(int(x) for x in self.A)
        self.U = frozenset(int(x) for x in self.U)


@dataclass
class RelaxedGadget:
    paths: tuple[tuple[int, ...], ...]
    T: np.ndarray
    parts: tuple[int, ...] = ()

    def __post_init__(self):
        self.paths = tuple(tuple(int(v) for v in p) for p in self.paths)
        self.T = np.unique(np.asarray(self.T, np.int64))

    @property
    def pairs(self) -> PairSet:
        return PairSet((p[0], p[-1]) for p in self.paths)


@dataclass
class DisjointnessGadget:
    paths: tuple[tuple[int, ...], ...]
    tree: np.ndarray
    cut: MovingCut
    beta: int
    parts: tuple[int, ...] = ()
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.paths = tuple(tuple(int(v) for v in p) for p in self.paths)
        self.tree = np.unique(np.asarray(self.tree, np.int64))

    @property
    def pairs(self) -> PairSet:
        return PairSet((p[0], p[-1]) for p in self.paths)

    @property
    def capacity(self) -> int:
        return self.cut.capacity


@dataclass(frozen=True)
class DiameterRegime:
    """The searched cut is too short relative to the diameter to build a gadget."""

    beta: int
    d: int

    @property
    def reason(self) -> str:
        return f"diameter regime: beta {self.beta} < 9 * D = {9 * self.d}"


@dataclass(frozen=True)
class Report:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


_OK = Report(True)


# ---------------------------------------------------------------- small helpers


def walk_edge_ids(g: Graph, w: Sequence[int]) -> np.ndarray:
    if len(w) < 2:
        return np.empty(0, np.int64)
    return g.edge_ids(np.column_stack([w[:-1], w[1:]]))


def edge_nodes(g: Graph, T: np.ndarray) -> np.ndarray:
    return np.unique(g.edges[np.asarray(T, np.int64)].ravel())


def edges_connected(g: Graph, T: np.ndarray) -> bool:
    T = np.asarray(T, np.int64)
    if not T.size:
        return False
    ends = g.edges[T]
    nodes = np.unique(ends.ravel())
    return int(component_labels(len(nodes), np.searchsorted(nodes, ends)).max()) == 0


def cover_count(positions: Iterable[int], d: int) -> int:
    """Fewest sub-paths of length <= d covering the given path positions."""
    count = 0
    end = None
    for p in sorted(set(positions)):
        if end is None or p > end:
            count += 1
            end = p + d
    return count


def _positions(path: Sequence[int], mask: np.ndarray) -> list[int]:
    return [i for i, v in enumerate(path) if mask[v]]


def _mask(n: int, nodes) -> np.ndarray:
    m = np.zeros(n, np.bool_)
    m[np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, np.int64)] = True
    return m


def graph_diameter(g: Graph, exact_limit: int = 4096) -> int:
    """Exact diameter for small graphs, otherwise the certified upper bound."""
    if g.n <= exact_limit:
        return diameter(g)
    return diameter_bounds(g)[1]


# ---------------------------------------------------------------- contraction graph


class ContractionGraph:
    """Parts as vertices; {i, j} is an edge when some G-path joins p_i to p_j
    with every internal node off all part-paths.

    Adjacency is a dense boolean matrix.  Witness paths are computed on
    demand, one BFS per source part, and cached.
    """

    def __init__(self, g: Graph, pp: PartPaths):
        self.g = g
        self.pp = pp
        k = pp.k
        part_of = np.asarray(pp.part_of)
        adj = np.zeros((k, k), np.bool_)
        a = part_of[g.edges[:, 0]]
        b = part_of[g.edges[:, 1]]
        direct = (a >= 0) & (b >= 0) & (a != b)
        adj[a[direct], b[direct]] = True
        adj[b[direct], a[direct]] = True
        free = part_of < 0
        both_free = free[g.edges[:, 0]] & free[g.edges[:, 1]]
        comp = component_labels(g.n, g.edges[both_free])
        touch = free[g.edges[:, 0]] != free[g.edges[:, 1]]
        fu = np.where(free[g.edges[touch, 0]], g.edges[touch, 0], g.edges[touch, 1])
        pv = np.where(free[g.edges[touch, 0]], g.edges[touch, 1], g.edges[touch, 0])
        links = np.unique(np.column_stack([comp[fu], part_of[pv]]), axis=0)
        if links.size:
            cuts = np.flatnonzero(np.diff(links[:, 0])) + 1
            for group in np.split(links[:, 1], cuts):
                if group.size > 1:
                    adj[np.ix_(group, group)] = True
        np.fill_diagonal(adj, False)
        self.adj = adj
        self._witness: dict[int, dict[int, tuple[int, ...]]] = {}

    @property
    def k(self) -> int:
        return self.adj.shape[0]

    @property
    def degree(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i])

    def edges(self) -> list[tuple[int, int]]:
        iu = np.argwhere(np.triu(self.adj, 1))
        return [(int(i), int(j)) for i, j in iu]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j])

    def witnesses(self, i: int, js: Iterable[int]) -> dict[int, tuple[int, ...]]:
        """Witness paths from p_i to each p_j (shortest, lowest-id endpoint)."""
        js = [int(j) for j in js]
        cache = self._witness.setdefault(i, {})
        todo = [j for j in js if j not in cache]
        if todo:
            g = self.g
            part_of = np.asarray(self.pp.part_of)
            expand = (part_of < 0) | (part_of == i)
            dist, parent = K.bfs(g.indptr, g.indices, list(self.pp.paths[i]), expand, parents=True)
            for j in todo:
                nodes = np.asarray(self.pp.paths[j], np.int64)
                ok = nodes[dist[nodes] > 0]
                if not ok.size:
                    raise ValidationError(f"parts {i} and {j} are not adjacent in the contraction graph")
                best = ok[dist[ok] == dist[ok].min()].min()
                path = [int(best)]
                while dist[path[-1]] > 0:
                    path.append(int(parent[path[-1]]))
                cache[j] = tuple(reversed(path))
        return {j: cache[j] for j in js}

    def witness(self, i: int, j: int) -> tuple[int, ...]:
        return self.witnesses(i, [j])[j]


def build_contraction_graph(g: Graph, pp: PartPaths) -> ContractionGraph:
    return ContractionGraph(g, pp)


# ---------------------------------------------------------------- minimal part-paths


def minimalize_paths(g: Graph, pairs: PairSet | None, initial: PartPaths) -> PartPaths:
    """Shorten part-paths locally until each is a shortest path avoiding the others.

    Round-robin: every path is replaced by a BFS shortest path in G minus the
    other part-paths whenever that is strictly shorter.  The total length drops
    with every replacement, so the loop terminates.  The fixpoint is not
    necessarily a global minimum of the total length, but every sub-path of
    each p_i is a shortest path in G minus the other part-paths.
    """
    if pairs is not None:
        if [(p[0], p[-1]) for p in initial.paths] != list(pairs):
            raise ValidationError("initial paths do not match the pair endpoints")
    paths = [list(p) for p in initial.paths]
    owner = np.array(initial.part_of, np.int64)
    changed = True
    while changed:
        changed = False
        for i, p in enumerate(paths):
            if len(p) <= 2:
                continue
            blocked = (owner >= 0) & (owner != i)
            q = bfs_path(g, p[0], p[-1], blocked)
            if q is not None and len(q) < len(p):
                owner[p] = -1
                owner[q] = i
                paths[i] = q
                changed = True
    return PartPaths(g, paths, check=False)


def is_locally_minimal(g: Graph, pp: PartPaths) -> bool:
    """Every p_i is a shortest s_i-t_i path in G minus the other part-paths."""
    owner = np.asarray(pp.part_of)
    for i, p in enumerate(pp.paths):
        blocked = (owner >= 0) & (owner != i)
        dist = K.bfs(g.indptr, g.indices, [p[0]], ~blocked)
        if dist[p[-1]] != len(p) - 1:
            return False
    return True


def route_pairs(g: Graph, pairs: PairSet) -> PartPaths:
    """Greedy vertex-disjoint routing, pairs in index order, BFS each time."""
    ends = np.zeros(g.n, np.bool_)
    for s, t in pairs:
        ends[s] = ends[t] = True
    used = np.zeros(g.n, np.bool_)
    paths = []
    for s, t in pairs:
        blocked = used | ends
        blocked[[s, t]] = used[[s, t]]
        p = bfs_path(g, s, t, blocked)
        if p is None or used[p].any():
            raise ValidationError(f"greedy routing could not connect pair ({s}, {t})")
        used[p] = True
        paths.append(p)
    return PartPaths(g, paths)


# ---------------------------------------------------------------- crowns: high degree


def crowns_high_degree(r: ContractionGraph) -> list[Crown]:
    """Seed-and-grow crowns on parts of contraction degree >= 3.

    Seeds and growth steps take the lowest eligible part index.
    """
    k = r.k
    adj = r.adj
    pp = r.pp
    g = r.g
    avail = np.ones(k, np.bool_)
    free_deg = adj.sum(axis=1).astype(np.int64)

    def take(xs):
        xs = np.asarray(sorted(xs), np.int64)
        avail[xs] = False
        free_deg[:] -= adj[xs].sum(axis=0)

    crowns = []
    while True:
        seeds = np.flatnonzero(avail & (free_deg >= 3))
        if not seeds.size:
            break
        v = int(seeds[0])
        nbrs = [int(x) for x in np.flatnonzero(adj[v] & avail)]
        take([v] + nbrs)
        A = {v, *nbrs}
        U = set(nbrs)
        T = [walk_edge_ids(g, pp.paths[v])]
        T += [walk_edge_ids(g, w) for w in r.witnesses(v, nbrs).values()]
        while True:
            grow = [w for w in sorted(U) if free_deg[w] >= 2]
            if not grow:
                break
            w = grow[0]
            X = [int(x) for x in np.flatnonzero(adj[w] & avail)]
            take(X)
            A.update(X)
            U.discard(w)
            U.update(X)
            T.append(walk_edge_ids(g, pp.paths[w]))
            T += [walk_edge_ids(g, q) for q in r.witnesses(w, X).values()]
        crowns.append(Crown(np.concatenate(T), A, U, pp, {"seed": v}))
    return crowns


def high_degree_charging_holds(r: ContractionGraph, crowns: Sequence[Crown]) -> bool:
    """Every uncrowned part of degree >= 3 has a useful crowned neighbour."""
    useful = np.zeros(r.k, np.bool_)
    crowned = np.zeros(r.k, np.bool_)
    for c in crowns:
        useful[list(c.U)] = True
        crowned[list(c.A)] = True
    deg = r.degree
    for h in np.flatnonzero(~crowned & (deg >= 3)):
        if not (r.adj[h] & useful).any():
            return False
    return True


# ---------------------------------------------------------------- crowns: low degree


def path_split(ell: int) -> int:
    """x = 3 * ceil(ell / 9) - 1 for an R-path with ell edges."""
    return 3 * math.ceil(ell / 9) - 1


def _low_degree_paths(r: ContractionGraph) -> list[list[int]]:
    k = r.k
    deg = r.degree
    keep = deg <= 2
    if keep.all() and k >= 3 and (deg == 2).all():
        keep[0] = False  # R is a single cycle: drop the lowest-id part
    idx = np.flatnonzero(keep)
    sub = r.adj[np.ix_(idx, idx)]
    edges = np.argwhere(np.triu(sub, 1))
    comp = component_labels(len(idx), edges) if len(idx) else np.empty(0, np.int64)
    out = []
    for c in np.unique(comp):
        members = np.flatnonzero(comp == c)
        if len(members) < 10:
            continue
        local = sub[np.ix_(members, members)]
        ends = members[local.sum(axis=1) <= 1]
        if not ends.size:  # pragma: no cover - cycles only arise when R itself is one
            continue
        order = [int(ends.min())]
        prev = -1
        while True:
            nxt = [int(x) for x in members[sub[order[-1], members]] if int(x) != prev]
            if not nxt:
                break
            prev = order[-1]
            order.append(nxt[0])
        out.append([int(idx[v]) for v in order])
    return out


def _crowns_on_path(g: Graph, pp: PartPaths, f: Sequence[int], d: int) -> list[Crown]:
    part_of = np.asarray(pp.part_of)
    ell = len(f) - 1
    x = path_split(ell)
    a = pp.paths[f[x]][0]
    b = pp.paths[f[2 * x]][0]
    w = bfs_path(g, a, b)
    w1 = clip_walk(w, pp.paths[f[x]], pp.paths[f[0]] + pp.paths[f[2 * x]])
    end = int(part_of[w1[-1]])
    fp = list(f[x::-1]) if end == f[0] else list(f[x : 2 * x + 1])
    crowns = []
    for i in range(0, x + 1, 3):
        trip = fp[i : i + 3]
        try:
            wi = clip_walk(w1, pp.paths[trip[0]], pp.paths[trip[2]])
        except ClipUndefined:
            log.warning("low-degree crown: clip undefined for triple %s", trip)
            continue
        mid = trip[1]
        hits = [j for j, v in enumerate(wi) if part_of[v] == mid]
        if hits:
            p = pp.paths[mid]
            pu, pv = p.index(wi[hits[0]]), p.index(wi[hits[-1]])
            seg = list(p[pu : pv + 1]) if pu <= pv else list(p[pv : pu + 1])[::-1]
            wi = list(wi[: hits[0]]) + seg + list(wi[hits[-1] + 1 :])
        crowns.append(Crown(walk_edge_ids(g, wi), trip, trip, pp, {"path_len": len(f)}))
    return crowns


def crowns_low_degree(g: Graph, r: ContractionGraph, pp: PartPaths, d: int) -> list[Crown]:
    """Triple crowns along long paths of R restricted to degree <= 2 parts."""
    crowns = []
    for f in _low_degree_paths(r):
        for c in _crowns_on_path(g, pp, f, d):
            rep = validate_crown(g, pp, c, d)
            if rep.ok:
                crowns.append(c)
            else:
                log.warning("dropping low-degree crown on %s: %s", sorted(c.A), rep.reason)
    return crowns


# ---------------------------------------------------------------- merging


def _label_bfs(g: Graph, label: np.ndarray):
    src = np.flatnonzero(label >= 0)
    dist, parent = K.bfs(g.indptr, g.indices, src, parents=True)
    lab = label.copy()
    for lvl in range(1, int(dist.max()) + 1):
        at = np.flatnonzero(dist == lvl)
        lab[at] = lab[parent[at]]
    return dist, parent, lab


def merge_crowns(g: Graph, pp: PartPaths, crowns: Sequence[Crown]) -> Crown:
    """Join disjoint crowns pairwise along globally shortest connecting paths."""
    crowns = list(crowns)
    if not crowns:
        raise ValueError("nothing to merge")
    seen: set[int] = set()
    for c in crowns:
        if seen & c.A:
            raise ValidationError("crowns to merge are not disjoint")
        seen |= c.A
    part_of = np.asarray(pp.part_of)
    while len(crowns) > 1:
        label = np.full(g.n, -1, np.int64)
        for ci, c in enumerate(crowns):
            for i in c.A:
                label[list(pp.paths[i])] = ci
        dist, parent, lab = _label_bfs(g, label)
        u, v = g.edges[:, 0], g.edges[:, 1]
        cross = (lab[u] >= 0) & (lab[v] >= 0) & (lab[u] != lab[v])
        cost = np.where(cross, dist[u] + dist[v] + 1, K.INF)
        e = int(np.argmin(cost))
        a, b = int(u[e]), int(v[e])
        left = [a]
        while dist[left[-1]] > 0:
            left.append(int(parent[left[-1]]))
        right = [b]
        while dist[right[-1]] > 0:
            right.append(int(parent[right[-1]]))
        q = left[::-1] + right
        ci, cj = int(lab[a]), int(lab[b])
        parts_T = [crowns[ci].T, crowns[cj].T, walk_edge_ids(g, q)]
        U = set(crowns[ci].U | crowns[cj].U)
        for end in (q[0], q[-1]):
            x = int(part_of[end])
            if x in U:
                U.discard(x)
                parts_T.append(walk_edge_ids(g, pp.paths[x]))
        merged = Crown(np.concatenate(parts_T), crowns[ci].A | crowns[cj].A, U, pp)
        crowns = [c for t, c in enumerate(crowns) if t not in (ci, cj)] + [merged]
    return crowns[0]


# ---------------------------------------------------------------- full crown


def crown_from_pairs(
    g: Graph,
    pairs: PairSet,
    paths: PartPaths | None = None,
    d: int | None = None,
    *,
    near: tuple[float, float] = (0.05, 0.2),
) -> Crown:
    """Minimalize, build R, run the matching degree case(s) and merge.

    Both cases run when |N+[H]| / k falls inside ``near``; the collection
    covering more parts wins.  The result carries the minimal paths it was
    built on in ``crown.paths``.
    """
    k = pairs.k
    if k < MIN_K:
        raise ConstructionShortfall(f"need at least {MIN_K} pairs for a crown", got=k, need=MIN_K)
    d = graph_diameter(g) if d is None else d
    pp = route_pairs(g, pairs) if paths is None else paths
    pp = minimalize_paths(g, pairs, pp)
    r = build_contraction_graph(g, pp)
    high = r.degree >= 3
    gamma = int((high | r.adj[high].any(axis=0)).sum())
    ratio = gamma / k
    cases = []
    if ratio >= 0.1 or ratio >= near[0]:
        cases.append("high")
    if ratio < 0.1 or ratio <= near[1]:
        cases.append("low")
    best: list[Crown] = []
    best_case = None
    for case in cases:
        found = crowns_high_degree(r) if case == "high" else crowns_low_degree(g, r, pp, d)
        if sum(len(c.A) for c in found) > sum(len(c.A) for c in best):
            best, best_case = found, case
    for c in best:
        rep = validate_crown(g, pp, c, d)
        if not rep.ok:
            raise ValidationError(f"{best_case}-degree crown invalid: {rep.reason}")
    need = math.ceil(k / 280)
    if not best:
        raise ConstructionShortfall("no crowns found", got=0, need=need)
    crown = merge_crowns(g, pp, best)
    crown.paths = pp
    crown.info.update({"case": best_case, "gamma_ratio": ratio, "crowns": len(best), "covered": sum(len(c.A) for c in best), "d": d})
    rep = validate_crown(g, pp, crown, d, family=crown.A)
    if not rep.ok:
        raise ValidationError(f"merged crown invalid: {rep.reason}")
    if len(crown.U) < need:
        raise ConstructionShortfall("crown has too few useful parts", got=len(crown.U), need=need)
    return crown


# ---------------------------------------------------------------- crown -> relaxed gadget


def independent_set_min_degree(nodes: Sequence[int], edges: Iterable[tuple[int, int]]) -> list[int]:
    """Greedy: take a minimum-degree vertex (lowest id on ties), delete its neighbours."""
    adj: dict[int, set[int]] = {int(v): set() for v in nodes}
    for a, b in edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    out = []
    while adj:
        v = min(adj, key=lambda x: (len(adj[x]), x))
        out.append(v)
        gone = adj[v] | {v}
        for x in gone:
            for y in adj.pop(x, ()):
                if y in adj:
                    adj[y].discard(x)
    return sorted(out)


def _walk_to(dist: np.ndarray, parent: np.ndarray, v: int) -> list[int]:
    w = [int(v)]
    while dist[w[-1]] > 0:
        w.append(int(parent[w[-1]]))
    return w


def crown_to_relaxed(g: Graph, crown: Crown, pp: PartPaths | None = None, d: int | None = None) -> RelaxedGadget:
    """Connect both endpoints of an independent set of useful parts to T."""
    pp = crown.paths if pp is None else pp
    if pp is None:
        raise ValueError("crown has no part-paths attached; pass pp")
    d = graph_diameter(g) if d is None else d
    part_of = np.asarray(pp.part_of)
    U = sorted(crown.U)
    useful = np.zeros(pp.k, np.bool_)
    useful[U] = True
    tmask = _mask(g.n, edge_nodes(g, crown.T))
    dist, parent = K.bfs(g.indptr, g.indices, np.flatnonzero(tmask), parents=True)

    walks: dict[int, list[list[int]]] = {}
    arcs = []
    for i in U:
        walks[i] = []
        for end in (pp.paths[i][0], pp.paths[i][-1]):
            w = _walk_to(dist, parent, end)
            for j in range(1, len(w)):
                x = int(part_of[w[j]])
                if x >= 0 and x != i and useful[x]:
                    w = w[: j + 1]
                    arcs.append((i, x))
                    break
            walks[i].append(w)
    keep = independent_set_min_degree(U, arcs)
    need = math.ceil(len(U) / 5)
    if len(keep) < need:  # pragma: no cover - guaranteed by the min-degree greedy
        raise ConstructionShortfall("independent set too small", got=len(keep), need=need)

    tp_parts = [crown.T] + [walk_edge_ids(g, pp.paths[j]) for j in U if j not in set(keep)]
    tnodes = _mask(g.n, edge_nodes(g, np.concatenate(tp_parts)))
    newp = {i: list(pp.paths[i]) for i in keep}
    for i in keep:
        for side, f in enumerate(walks[i]):
            if len(f) < 2:
                continue
            hit = [j for j in range(1, len(f)) if tnodes[f[j]]]
            if hit and hit[0] < len(f) - 1:
                f = f[: hit[0] + 1]
            p = newp[i]
            pos = {v: t for t, v in enumerate(p)}
            on = [(pos[v], j) for j, v in enumerate(f) if v in pos]
            if side == 0:
                at, j = max(on)
                newp[i] = list(f[: j + 1]) + p[at + 1 :]
            else:
                at, j = min(on)
                newp[i] = p[:at] + list(f[: j + 1])[::-1]
            tp_parts.append(walk_edge_ids(g, f))
            tnodes[f] = True
    rg = RelaxedGadget([newp[i] for i in keep], np.concatenate(tp_parts), tuple(keep))
    rep = validate_relaxed(g, rg, d)
    if not rep.ok:
        raise ValidationError(f"relaxed gadget invalid: {rep.reason}")
    return rg


# ---------------------------------------------------------------- relaxed -> strict gadget


def _spanning_tree(g: Graph, T: np.ndarray) -> np.ndarray:
    ends = g.edges[T]
    nodes = np.unique(ends.ravel())
    indptr, indices, eid = csr_from_edges(len(nodes), np.searchsorted(nodes, ends))
    dist, parent = K.bfs(indptr, indices, [0], parents=True)
    if (dist < 0).any():
        raise ValidationError("tree support is disconnected")
    child = np.flatnonzero(dist > 0)
    return g.edge_ids(np.column_stack([nodes[child], nodes[parent[child]]]))


def _scale_ladder():
    yield 1
    yield from SCALE_LADDER
    c = 5
    while True:
        yield c
        c += 1


def strictify(
    g: Graph,
    relaxed: RelaxedGadget,
    mc: MovingCut,
    beta: int,
    d: int,
    *,
    capacity_divisor: int = 1,
    max_scale: int = 64,
) -> DisjointnessGadget:
    """Turn a relaxed gadget plus a moving cut into a strict disjointness gadget.

    The cut is scaled by the smallest ladder factor that leaves
    ``capacity * capacity_divisor`` below the number of surviving paths.
    Each surviving path keeps its longest stretch between consecutive T
    contacts, the rest of the path joins the tree support, and pairs are
    greedily discarded (closest source first) until every cross distance
    reaches ``beta / (4 * ceil(log2 k))``.
    """
    if beta < 9 * d:
        raise HypothesisViolated(f"beta {beta} < 9 * D = {9 * d}")
    base_T = relaxed.T
    tmask = _mask(g.n, edge_nodes(g, base_T))
    last = None
    for c in _scale_ladder():
        if c > max_scale:
            break
        cut = mc if c == 1 else scale(mc, c)
        kept, trims = [], []
        for idx, p in enumerate(relaxed.paths):
            if (cut.lengths[walk_edge_ids(g, p)] != 1).any():
                continue
            pos = _positions(p, tmask)
            gaps = [(pos[t + 1] - pos[t], -t) for t in range(len(pos) - 1)]
            if not gaps:
                continue
            size, neg = max(gaps)
            if size < 3:
                continue
            a, b = pos[-neg], pos[-neg + 1]
            kept.append((idx, p[a : b + 1]))
            trims.append(walk_edge_ids(g, p[: a + 1]))
            trims.append(walk_edge_ids(g, p[b:]))
        if cut.capacity * capacity_divisor >= len(kept):
            last = f"capacity {cut.capacity} (x{capacity_divisor}) not below {len(kept)} unit paths at scale {c}"
            continue
        tau = beta / (4 * max(1, math.ceil(math.log2(max(2, len(kept))))))
        alive = list(range(len(kept)))
        lengths_csr = cut.lengths[g.eid]
        dropped = 0
        while alive:
            sinks = sorted({kept[t][1][-1] for t in alive})
            dist = K.dijkstra(g.indptr, g.indices, lengths_csr, sinks)
            ds = [int(dist[kept[t][1][0]]) for t in alive]
            worst = int(np.argmin(ds))
            if ds[worst] >= tau:
                break
            alive.pop(worst)
            dropped += 1
        final = [kept[t] for t in alive]
        if not final or cut.capacity * capacity_divisor >= len(final):
            last = f"only {len(final)} pairs left after distance filtering at scale {c}"
            continue
        measured = min(ds) if alive else 0
        tree = _spanning_tree(g, np.unique(np.concatenate([base_T] + trims)))
        sg = DisjointnessGadget(
            [p for _, p in final],
            tree,
            cut,
            int(min(measured, beta)),
            tuple(relaxed.parts[i] if relaxed.parts else i for i, _ in final),
            {
                "scale": str(c),
                "unit_paths": len(kept),
                "dropped_by_distance": dropped,
                "kept_fraction": len(final) / max(1, len(kept)),
                "tau": tau,
                "measured_distance": int(measured),
                "input_beta": int(beta),
            },
        )
        rep = validate_strict(g, sg)
        if rep.ok:
            return sg
        last = rep.reason
    raise ConstructionShortfall(f"strictify failed: {last}")


# ---------------------------------------------------------------- validators


def validate_crown(g: Graph, pp: PartPaths, crown: Crown, d: int, family: Iterable[int] | None = None) -> Report:
    fam = set(range(pp.k)) if family is None else {int(x) for x in family}
    if not crown.U <= crown.A:
        return Report(False, "U is not a subset of A")
    if not crown.A <= fam:
        return Report(False, "A contains parts outside the path family")
    T = crown.T
    if T.size and (T.min() < 0 or T.max() >= g.m):
        return Report(False, "T contains an unknown edge id")
    if not edges_connected(g, T):
        return Report(False, "T is empty or disconnected")
    if 4 * len(crown.U) < len(crown.A) + 8:
        return Report(False, f"property 1: |U| = {len(crown.U)} < |A|/4 + 2 = {len(crown.A) / 4 + 2}")
    nodes = edge_nodes(g, T)
    hit = np.asarray(pp.part_of)[nodes]
    outside = sorted(set(int(x) for x in hit[hit >= 0]) & (fam - crown.A))
    if outside:
        return Report(False, f"property 2: T touches part {outside[0]} outside A")
    tmask = _mask(g.n, nodes)
    for i in sorted(crown.U):
        pos = _positions(pp.paths[i], tmask)
        if not pos:
            return Report(False, f"property 3: T misses useful part {i}")
        if pos[-1] - pos[0] > d:
            return Report(False, f"property 3: T meets part {i} over a span of {pos[-1] - pos[0]} > D = {d}")
    return _OK


def _paths_ok(g: Graph, paths) -> Report:
    try:
        PartPaths(g, paths)
    except ValidationError as exc:
        return Report(False, str(exc))
    return _OK


def validate_relaxed(g: Graph, rg: RelaxedGadget, d: int) -> Report:
    rep = _paths_ok(g, rg.paths)
    if not rep:
        return rep
    if not edges_connected(g, rg.T):
        return Report(False, "T is empty or disconnected")
    tmask = _mask(g.n, edge_nodes(g, rg.T))
    for i, p in enumerate(rg.paths):
        if not (tmask[p[0]] and tmask[p[-1]]):
            return Report(False, f"T misses an endpoint of path {i}")
        n_cover = cover_count(_positions(p, tmask), d)
        if n_cover > 3:
            return Report(False, f"path {i} needs {n_cover} sub-paths of length <= {d} to cover its contact with T")
    return _OK


def validate_strict(g: Graph, sg: DisjointnessGadget) -> Report:
    rep = _paths_ok(g, sg.paths)
    if not rep:
        return rep
    for i, p in enumerate(sg.paths):
        if len(p) - 1 < 3:
            return Report(False, f"path {i} has hop length {len(p) - 1} < 3")
    T = sg.tree
    if not edges_connected(g, T):
        return Report(False, "tree is empty or disconnected")
    nodes = edge_nodes(g, T)
    if len(T) != len(nodes) - 1:
        return Report(False, f"T has {len(T)} edges on {len(nodes)} nodes, not a tree")
    tmask = _mask(g.n, nodes)
    for i, p in enumerate(sg.paths):
        pos = _positions(p, tmask)
        if pos != [0, len(p) - 1]:
            return Report(False, f"tree meets path {i} at positions {pos[:5]}, not exactly its endpoints")
    if sg.cut.capacity >= len(sg.paths):
        return Report(False, f"capacity {sg.cut.capacity} is not below |P| = {len(sg.paths)}")
    if sg.beta < 1:
        return Report(False, "recorded beta is below 1")
    srcs = sorted({p[0] for p in sg.paths})
    dist = K.dijkstra(g.indptr, g.indices, sg.cut.lengths[g.eid], srcs)
    got = int(dist[[p[-1] for p in sg.paths]].min())
    if got < sg.beta:
        return Report(False, f"cut distance {got} is below the recorded beta {sg.beta}")
    return _OK


# ---------------------------------------------------------------- pipeline


def pipeline(
    g: Graph,
    pairs: PairSet,
    paths: PartPaths | None = None,
    *,
    d: int | None = None,
    cut: MovingCut | None = None,
    beta: int | None = None,
    solver: str = "auto",
) -> DisjointnessGadget | DiameterRegime:
    """Moving cut -> crown -> relaxed gadget -> strict gadget, or the diameter regime."""
    d = graph_diameter(g) if d is None else d
    if cut is None:
        res = search(g, pairs, "lp", solver=solver)
        cut, beta = res.cut, res.beta
    elif beta is None:
        raise ValueError("beta is required with an explicit cut")
    if beta < 9 * d:
        return DiameterRegime(int(beta), int(d))
    crown = crown_from_pairs(g, pairs, paths, d)
    relaxed = crown_to_relaxed(g, crown, d=d)
    return strictify(g, relaxed, cut, beta, d)


def family_gadget(inst, solver: str = "auto") -> DisjointnessGadget:
    """Strict gadget read off a generated gadget-family instance.

    The rows are the paths and the generator's tree is T; the cut is the
    searched lp cut for the row endpoints.
    """
    if inst.meta.get("family") != "gadget":
        raise ValueError("instance is not from the gadget family")
    g = inst.graph
    res = search(g, inst.pairs, "lp", solver=solver)
    tree = g.edge_ids(inst.meta["tree_edges"])
    return DisjointnessGadget(tuple(map(tuple, inst.paths)), tree, res.cut, res.beta, extras={"source": "family"})


# ---------------------------------------------------------------- files


def gadget_to_json(g: Graph, sg: DisjointnessGadget) -> str:
    nonunit = np.flatnonzero(sg.cut.lengths != 1)
    doc = {
        "paths": [list(p) for p in sg.paths],
        "tree_edges": [list(g.edge(e)) for e in sg.tree.tolist()],
        "lengths": [[*g.edge(int(e)), int(sg.cut.lengths[e])] for e in nonunit],
        "beta": int(sg.beta),
        "capacity": int(sg.cut.capacity),
    }
    return json.dumps(doc, sort_keys=True)


def gadget_from_json(g: Graph, text: str) -> DisjointnessGadget:
    """Edges missing from ``lengths`` have length 1."""
    doc = json.loads(text)
    lengths = np.ones(g.m, np.int64)
    for u, v, x in doc["lengths"]:
        lengths[g.edge_id(u, v)] = x
    cut = MovingCut(g, lengths)
    if cut.capacity != doc["capacity"]:
        raise ValidationError(f"capacity field {doc['capacity']} disagrees with lengths ({cut.capacity})")
    tree = g.edge_ids([tuple(e) for e in doc["tree_edges"]]) if doc["tree_edges"] else []
    return DisjointnessGadget(doc["paths"], tree, cut, int(doc["beta"]))


def write_gadget(g: Graph, sg: DisjointnessGadget, path: str | Path) -> None:
    Path(path).write_text(gadget_to_json(g, sg) + "\n")


def read_gadget(g: Graph, path: str | Path) -> DisjointnessGadget:
    return gadget_from_json(g, Path(path).read_text())
