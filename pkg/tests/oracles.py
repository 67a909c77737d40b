"""Independent reference implementations used as test oracles.

Nothing here imports the algorithms under test; graph access is limited to
the edge list so the oracles stay independent of the CSR internals.
"""

from __future__ import annotations

import itertools
from collections import deque

import networkx as nx


def to_nx(g, weights=None):
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    for e, (u, v) in enumerate(g.edges.tolist()):
        if weights is None:
            h.add_edge(u, v, id=e)
        else:
            h.add_edge(u, v, id=e, weight=int(weights[e]))
    return h


def bfs_dist(adj, s):
    dist = {s: 0}
    q = deque([s])
    while q:
        v = q.popleft()
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def adjacency(n, edges):
    adj = {v: set() for v in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def brute_diameter(g):
    adj = adjacency(g.n, g.edges.tolist())
    return max(max(bfs_dist(adj, s).values()) for s in range(g.n))


class UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, x):
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        self.p[max(a, b)] = min(a, b)
        return True


def spans_connected(n, edges):
    uf = UnionFind(n)
    comps = n
    for u, v in edges:
        comps -= uf.union(u, v)
    return comps == 1


def kruskal(g, weights):
    """Edge ids of the MST with ties broken by edge id."""
    uf = UnionFind(g.n)
    order = sorted(range(g.m), key=lambda e: (int(weights[e]), e))
    edges = g.edges.tolist()
    return sorted(e for e in order if uf.union(*edges[e]))


def set_distance(g, lengths, X, Y):
    h = to_nx(g)
    for e, (u, v) in enumerate(g.edges.tolist()):
        h[u][v]["w"] = int(lengths[e])
    dist = nx.multi_source_dijkstra_path_length(h, set(X), weight="w")
    return min(dist[y] for y in Y)


def measure_parts(g, parts, edge_sets):
    """(c, d) of a part shortcut by definition."""
    load = [0] * g.m
    for es in edge_sets:
        for e in set(int(x) for x in es):
            load[e] += 1
    c = max(load, default=0)
    edges = g.edges.tolist()
    d = 0
    for part, es in zip(parts, edge_sets):
        pset = set(part)
        sub = [(u, v) for u, v in edges if u in pset and v in pset]
        sub += [tuple(edges[int(e)]) for e in es]
        adj = adjacency(g.n, sub)
        for s in part:
            dist = bfs_dist(adj, s)
            d = max(d, max(dist[t] for t in part))
    return c, d


def measure_paths(g, paths):
    load = {}
    for p in paths:
        for a, b in zip(p, p[1:]):
            k = (min(a, b), max(a, b))
            load[k] = load.get(k, 0) + 1
    return max(load.values(), default=0), max((len(p) - 1 for p in paths), default=0)


def disj(x, y):
    return int(not any(a and b for a, b in zip(x, y)))


def best_cut_distance(g, sources, sinks, k, lmax):
    """Largest set distance over all integer lengths in [1, lmax] with capacity < k."""
    best = 0
    for ell in itertools.product(range(1, lmax + 1), repeat=g.m):
        if sum(x - 1 for x in ell) >= k:
            continue
        best = max(best, set_distance(g, ell, sources, sinks))
    return best


def connected_graphs(n):
    """All connected labelled graphs on n nodes (n small)."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if len(edges) >= n - 1 and spans_connected(n, edges):
            yield edges
