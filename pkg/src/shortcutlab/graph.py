"""Graph representation and the walk / tree / distance primitives."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels as K
from .errors import ClipUndefined, GraphError

Edge = tuple[int, int]


def norm_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


def csr_from_edges(n: int, edges: np.ndarray):
    """Symmetric CSR arrays (indptr, indices, eid) with sorted rows."""
    edges = np.asarray(edges, np.int64).reshape(-1, 2)
    m = len(edges)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    ids = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((dst, src))
    src, dst, ids = src[order], dst[order], ids[order]
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int64), ids.astype(np.int64)


def component_labels(n: int, edges) -> np.ndarray:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    edges = np.asarray(edges, np.int64).reshape(-1, 2)
    mat = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(mat, directed=False)[1]


class Graph:
    """Undirected, simple, connected graph on nodes ``0..n-1``.

    Edges are stored once as ``(u, v)`` with ``u < v`` in lexicographic order;
    the position in that order is the edge id used by every per-edge array in
    the package (lengths, weights, indicators).
    """

    __slots__ = ("n", "edges", "indptr", "indices", "eid", "labels", "_adj", "_index")

    def __init__(self, n: int, edges: Iterable[Sequence[int]], labels: Sequence[Hashable] | None = None):
        if n < 1:
            raise GraphError("graph needs at least one node")
        arr = np.asarray([tuple(e) for e in edges] if not isinstance(edges, np.ndarray) else edges, np.int64)
        arr = arr.reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise GraphError(f"node ids must lie in 0..{n - 1}")
        if np.any(arr[:, 0] == arr[:, 1]):
            bad = arr[arr[:, 0] == arr[:, 1]][0]
            raise GraphError(f"self-loop at node {bad[0]}")
        arr = np.sort(arr, axis=1)
        order = np.lexsort((arr[:, 1], arr[:, 0]))
        arr = arr[order]
        if len(arr) > 1:
            dup = np.all(arr[1:] == arr[:-1], axis=1)
            if dup.any():
                u, v = arr[1:][dup][0]
                raise GraphError(f"parallel edge {{{u},{v}}}")
        if n > 1:
            comp = component_labels(n, arr)
            sizes = np.bincount(comp)
            if len(sizes) > 1:
                listed = sorted(sizes.tolist(), reverse=True)
                raise GraphError(f"graph is disconnected; component sizes {listed}")
        self.n = int(n)
        self.edges = arr
        self.edges.setflags(write=False)
        self.indptr, self.indices, self.eid = csr_from_edges(n, arr)
        for a in (self.indptr, self.indices, self.eid):
            a.setflags(write=False)
        if labels is not None and len(labels) != n:
            raise GraphError("label count does not match n")
        self.labels = tuple(labels) if labels is not None else None
        self._adj = None
        self._index = None

    # -- basic queries

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def adj(self) -> tuple[tuple[int, ...], ...]:
        if self._adj is None:
            ind = self.indices.tolist()
            ptr = self.indptr.tolist()
            self._adj = tuple(tuple(ind[ptr[v] : ptr[v + 1]]) for v in range(self.n))
        return self._adj

    def edge_id(self, u: int, v: int) -> int:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        p = lo + int(np.searchsorted(self.indices[lo:hi], v))
        if p >= hi or self.indices[p] != v:
            raise KeyError(f"no edge {{{u},{v}}}")
        return int(self.eid[p])

    def has_edge(self, u: int, v: int) -> bool:
        try:
            self.edge_id(u, v)
        except KeyError:
            return False
        return True

    def edge_ids(self, pairs) -> np.ndarray:
        """Vectorised edge-id lookup; raises KeyError on a non-edge."""
        pairs = np.sort(np.asarray(pairs, np.int64).reshape(-1, 2), axis=1)
        if not len(pairs):
            return np.zeros(0, np.int64)
        key = self.edges[:, 0] * self.n + self.edges[:, 1]
        q = pairs[:, 0] * self.n + pairs[:, 1]
        pos = np.searchsorted(key, q)
        pos = np.minimum(pos, len(key) - 1)
        if len(key) == 0 or np.any(key[pos] != q):
            bad = pairs[(len(key) == 0) | (key[pos] != q)][0]
            raise KeyError(f"no edge {{{bad[0]},{bad[1]}}}")
        return pos.astype(np.int64)

    def edge(self, e: int) -> Edge:
        u, v = self.edges[e]
        return int(u), int(v)

    def edge_weights_csr(self, per_edge) -> np.ndarray:
        """Spread a per-edge array onto the CSR entries."""
        return np.asarray(per_edge)[self.eid]

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges.tobytes()))

    # -- serialisation

    def to_text(self, extra=None) -> str:
        lines = [f"{self.n} {self.m}"]
        for e, (u, v) in enumerate(self.edges.tolist()):
            lines.append(f"{u} {v}" if extra is None else f"{u} {v} {int(extra[e])}")
        return "\n".join(lines) + "\n"

    def to_json(self, extra=None) -> str:
        edges = self.edges.tolist() if extra is None else [[u, v, int(extra[e])] for e, (u, v) in enumerate(self.edges.tolist())]
        return json.dumps({"n": self.n, "edges": edges})


def parse_graph(text: str) -> tuple[Graph, np.ndarray | None]:
    """Parse the text or JSON graph format.

    Returns the graph and, when a third column is present, the per-edge
    integers aligned to edge ids.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        n = int(obj["n"])
        rows = [list(map(int, r)) for r in obj["edges"]]
    else:
        lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines:
            raise GraphError("empty graph file")
        n, m = int(lines[0][0]), int(lines[0][1])
        rows = [list(map(int, ln)) for ln in lines[1:]]
        if len(rows) != m:
            raise GraphError(f"header announces {m} edges, found {len(rows)}")
    widths = {len(r) for r in rows}
    if widths - {2, 3}:
        raise GraphError("edge rows must have 2 or 3 columns")
    if len(widths) > 1:
        raise GraphError("mixed 2- and 3-column edge rows")
    g = Graph(n, [(r[0], r[1]) for r in rows])
    extra = None
    if widths == {3}:
        extra = np.zeros(g.m, np.int64)
        extra[g.edge_ids([(r[0], r[1]) for r in rows])] = [r[2] for r in rows]
    return g, extra


def read_graph(path: str | Path) -> tuple[Graph, np.ndarray | None]:
    return parse_graph(Path(path).read_text())


# ---------------------------------------------------------------- distances


def bfs_distances(g: Graph, sources) -> np.ndarray:
    return K.bfs(g.indptr, g.indices, np.atleast_1d(sources))


def bfs_path(g: Graph, s: int, t: int, blocked: np.ndarray | None = None) -> list[int] | None:
    """Shortest s-t path (lowest-id parents), optionally avoiding blocked nodes."""
    expand = None if blocked is None else ~blocked
    dist, parent = K.bfs(g.indptr, g.indices, [s], expand, parents=True)
    if dist[t] < 0:
        return None
    path = [t]
    while path[-1] != s:
        path.append(int(parent[path[-1]]))
    return path[::-1]


class _EccBounds:
    """Per-node eccentricity bounds refined by full BFS sweeps."""

    def __init__(self, g: Graph):
        self.g = g
        self.lower = np.zeros(g.n, np.int64)
        self.upper = np.full(g.n, np.iinfo(np.int64).max, np.int64)
        self.dlow = 0
        self.sweeps = 0

    def sweep(self, v: int) -> np.ndarray:
        d = K.bfs(self.g.indptr, self.g.indices, [v])
        e = int(d.max())
        self.dlow = max(self.dlow, e)
        np.maximum(self.lower, np.maximum(e - d, d), out=self.lower)
        np.minimum(self.upper, e + d, out=self.upper)
        self.lower[v] = self.upper[v] = e
        self.sweeps += 1
        return d

    def seed(self) -> None:
        # double sweep from a max-degree node, then a BFS from the middle of
        # the longest path found: on hub-centred graphs this closes most bounds
        g = self.g
        da = self.sweep(int(np.argmax(np.diff(g.indptr))))
        b = int(np.argmax(da))
        db = self.sweep(b)
        c = int(np.argmax(db))
        _, parent = K.bfs(g.indptr, g.indices, [b], parents=True)
        mid = c
        for _ in range(int(db[c]) // 2):
            mid = int(parent[mid])
        self.sweep(mid)

    def run(self, max_sweeps: int | None = None) -> tuple[int, int]:
        pick_upper = True
        while True:
            cand = np.flatnonzero(self.upper > self.dlow)
            if not cand.size:
                return self.dlow, self.dlow
            if max_sweeps is not None and self.sweeps >= max_sweeps:
                return self.dlow, int(self.upper.max())
            if pick_upper:
                v = int(cand[np.argmax(self.upper[cand])])
            else:
                v = int(cand[np.argmin(self.lower[cand])])
            pick_upper = not pick_upper
            self.sweep(v)


def diameter(g: Graph) -> int:
    """Exact hop diameter via eccentricity bounding (exact for every graph)."""
    n = g.n
    if n == 1:
        return 0
    if n <= 2048:
        return int(K.eccentricities(g.indptr, g.indices, np.arange(n)).max())
    eb = _EccBounds(g)
    eb.seed()
    return eb.run()[0]


def diameter_bounds(g: Graph, max_sweeps: int = 24) -> tuple[int, int]:
    """Certified (lower, upper) on the hop diameter after at most ``max_sweeps`` BFS runs.

    The two values coincide whenever the bounds close within the budget;
    small graphs are always solved exactly.
    """
    if g.n <= 2048:
        d = diameter(g)
        return d, d
    eb = _EccBounds(g)
    eb.seed()
    return eb.run(max_sweeps)


def _lengths_array(g: Graph, lengths) -> np.ndarray:
    if isinstance(lengths, Mapping):
        arr = np.ones(g.m, np.int64)
        for (u, v), x in lengths.items():
            arr[g.edge_id(u, v)] = x
    else:
        arr = np.asarray(lengths, np.int64)
        if arr.shape != (g.m,):
            raise ValueError(f"need one length per edge ({g.m}), got shape {arr.shape}")
    if arr.size and arr.min() < 1:
        raise ValueError("edge lengths must be integers >= 1")
    return arr


def ell_distances(g: Graph, lengths, sources) -> np.ndarray:
    """Distances from a node set under integer lengths (>= 1) per edge."""
    arr = _lengths_array(g, lengths)
    return K.dijkstra(g.indptr, g.indices, arr[g.eid], np.atleast_1d(sources))


def ell_distance(g: Graph, lengths, X: Iterable[int], Y: Iterable[int]) -> int:
    X = sorted(set(X))
    Y = sorted(set(Y))
    if not X or not Y:
        raise ValueError("X and Y must be nonempty")
    d = ell_distances(g, lengths, X)
    return int(d[Y].min())


def ell_path(g: Graph, lengths, X: Iterable[int], Y: Iterable[int]) -> list[int]:
    """A shortest X-Y path under ``lengths`` (lowest-id tie-breaking)."""
    arr = _lengths_array(g, lengths)
    X = sorted(set(X))
    dist, parent = K.dijkstra(g.indptr, g.indices, arr[g.eid], X, parents=True)
    Y = np.asarray(sorted(set(Y)), np.int64)
    t = int(Y[np.argmin(dist[Y])])
    path = [t]
    while dist[path[-1]] > 0:
        path.append(int(parent[path[-1]]))
    return path[::-1]


# ---------------------------------------------------------------- walks


def is_walk(g: Graph, w: Sequence[int]) -> bool:
    if not len(w):
        return False
    if any(not 0 <= v < g.n for v in w):
        return False
    return all(g.has_edge(a, b) for a, b in zip(w, w[1:]))


def walk_edges(w: Sequence[int]) -> list[Edge]:
    return [norm_edge(a, b) for a, b in zip(w, w[1:])]


def clip_walk(w: Sequence[int], A: Iterable[int], B: Iterable[int]) -> list[int]:
    """Subwalk from the last visit of A to the first later visit of B."""
    A = set(A)
    B = set(B)
    last = None
    for i, v in enumerate(w):
        if v in A:
            last = i
    if last is None:
        raise ClipUndefined("clip undefined: walk never visits A")
    for j in range(last + 1, len(w)):
        if w[j] in B:
            return list(w[last : j + 1])
    raise ClipUndefined("clip undefined: no B visit after the last A visit")


def project_labels(labels: Sequence[int | None]) -> list[int]:
    """Drop ``None`` entries and merge consecutive duplicates."""
    out: list[int] = []
    for x in labels:
        if x is None:
            continue
        if not out or out[-1] != x:
            out.append(x)
    return out


def project_walk(w: Sequence[int], part_of) -> list[int]:
    """Project a walk onto part indices; ``part_of[v]`` is -1/None off all parts."""
    labels = []
    for v in w:
        x = part_of[v] if not isinstance(part_of, Mapping) else part_of.get(v)
        labels.append(None if x is None or x < 0 else int(x))
    return project_labels(labels)


# ---------------------------------------------------------------- trees


def bfs_tree(g: Graph, nodes: Iterable[int], root: int | None = None) -> dict[int, int | None]:
    """BFS spanning tree of G[nodes] from ``root`` (default: lowest id).

    Returns a parent map with ``parent[root] is None``; parents are the
    lowest-id neighbour one level closer to the root.
    """
    nodes = sorted(set(nodes))
    if root is None:
        root = nodes[0]
    inside = np.zeros(g.n, np.bool_)
    inside[nodes] = True
    dist = {root: 0}
    order = [root]
    q = deque([root])
    while q:
        v = q.popleft()
        for u in g.neighbors(v).tolist():
            if inside[u] and u not in dist:
                dist[u] = dist[v] + 1
                order.append(u)
                q.append(u)
    if len(dist) != len(nodes):
        raise GraphError("node set does not induce a connected subgraph")
    parent: dict[int, int | None] = {root: None}
    for v in order[1:]:
        parent[v] = next(u for u in g.neighbors(v).tolist() if inside[u] and dist.get(u) == dist[v] - 1)
    return parent


@dataclass(frozen=True)
class HeavyLightDecomposition:
    """Heavy-light labelling of a rooted tree.

    Naming follows the convention used throughout this package: the edge from a
    node to its child with the largest subtree is *light*; all other child
    edges are *heavy*.  Light edges chain into vertex-disjoint paths, and every
    root-to-leaf path crosses at most ``floor(log2 n)`` heavy edges.
    """

    root: int
    parent: Mapping[int, int | None]
    size: Mapping[int, int]
    light_child: Mapping[int, int | None]
    labels: Mapping[Edge, str]
    light_paths: tuple[tuple[int, ...], ...]
    heavy_depth: Mapping[int, int]
    path_of: Mapping[int, int] = field(repr=False)

    def heavy_edges(self) -> list[Edge]:
        return [e for e, lab in self.labels.items() if lab == "heavy"]

    def light_edges(self) -> list[Edge]:
        return [e for e, lab in self.labels.items() if lab == "light"]


def _check_tree(parent: Mapping[int, int | None]) -> tuple[int, dict[int, list[int]]]:
    roots = [v for v, p in parent.items() if p is None]
    if len(roots) != 1:
        raise GraphError(f"tree needs exactly one root, found {len(roots)}")
    children: dict[int, list[int]] = {v: [] for v in parent}
    for v, p in parent.items():
        if p is None:
            continue
        if p not in parent:
            raise GraphError(f"parent {p} of {v} is not a tree node")
        children[p].append(v)
    root = roots[0]
    seen = 0
    stack = [root]
    while stack:
        v = stack.pop()
        seen += 1
        stack.extend(children[v])
    if seen != len(parent):
        raise GraphError("parent map contains a cycle or is disconnected")
    for c in children.values():
        c.sort()
    return root, children


def heavy_light(parent: Mapping[int, int | None] | Sequence[int]) -> HeavyLightDecomposition:
    """Heavy-light decomposition of a rooted tree given as a parent map.

    A sequence is read as ``parent[v]`` with -1 marking the root.
    """
    if not isinstance(parent, Mapping):
        parent = {v: (None if p < 0 else int(p)) for v, p in enumerate(parent)}
    root, children = _check_tree(parent)
    order = [root]
    for v in order:
        order.extend(children[v])
    size = {v: 1 for v in parent}
    for v in reversed(order):
        p = parent[v]
        if p is not None:
            size[p] += size[v]
    light_child: dict[int, int | None] = {}
    labels: dict[Edge, str] = {}
    for v in order:
        kids = children[v]
        if not kids:
            light_child[v] = None
            continue
        best = max(kids, key=lambda c: (size[c], -c))
        light_child[v] = best
        for c in kids:
            labels[norm_edge(v, c)] = "light" if c == best else "heavy"
    heavy_depth = {root: 0}
    for v in order[1:]:
        p = parent[v]
        heavy_depth[v] = heavy_depth[p] + (0 if light_child[p] == v else 1)
    paths = []
    path_of = {}
    for v in order:
        p = parent[v]
        if p is not None and light_child[p] == v:
            continue
        chain = [v]
        while light_child[chain[-1]] is not None:
            chain.append(light_child[chain[-1]])
        for x in chain:
            path_of[x] = len(paths)
        paths.append(tuple(chain))
    return HeavyLightDecomposition(
        root=root,
        parent=dict(parent),
        size=size,
        light_child=light_child,
        labels=labels,
        light_paths=tuple(paths),
        heavy_depth=heavy_depth,
        path_of=path_of,
    )


# ---------------------------------------------------------------- biconnectivity


@dataclass(frozen=True)
class Biconnected:
    components: tuple[frozenset[int], ...]
    articulation_points: frozenset[int]
    d_bcc: int


def _induced_diameter(g: Graph, nodes: Sequence[int]) -> int:
    nodes = sorted(nodes)
    local = {v: i for i, v in enumerate(nodes)}
    edges = [(local[u], local[v]) for u in nodes for v in g.neighbors(u).tolist() if v in local and u < v]
    indptr, indices, _ = csr_from_edges(len(nodes), np.asarray(edges, np.int64))
    return int(K.eccentricities(indptr, indices, np.arange(len(nodes))).max())


def biconnected(g: Graph) -> Biconnected:
    """Biconnected components (Hopcroft-Tarjan, iterative) and their max diameter."""
    n = g.n
    adj = g.adj
    disc = [-1] * n
    low = [0] * n
    comps: list[frozenset[int]] = []
    arts: set[int] = set()
    timer = 0
    estack: list[Edge] = []
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        root_children = 0
        stack = [(root, -1, 0)]
        while stack:
            v, par, i = stack[-1]
            if i < len(adj[v]):
                stack[-1] = (v, par, i + 1)
                u = adj[v][i]
                if disc[u] == -1:
                    disc[u] = low[u] = timer
                    timer += 1
                    estack.append((v, u))
                    if v == root:
                        root_children += 1
                    stack.append((u, v, 0))
                elif u != par and disc[u] < disc[v]:
                    low[v] = min(low[v], disc[u])
                    estack.append((v, u))
                continue
            stack.pop()
            if par == -1:
                continue
            low[par] = min(low[par], low[v])
            if low[v] >= disc[par]:
                if par != root:
                    arts.add(par)
                nodes: set[int] = set()
                while True:
                    a, b = estack.pop()
                    nodes.update((a, b))
                    if (a, b) == (par, v):
                        break
                comps.append(frozenset(nodes))
        if root_children > 1:
            arts.add(root)
    comps.sort(key=lambda c: (min(c), len(c)))
    d_bcc = max((_induced_diameter(g, c) for c in comps), default=0)
    return Biconnected(tuple(comps), frozenset(arts), d_bcc)


def log2ceil(x: int) -> int:
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0
