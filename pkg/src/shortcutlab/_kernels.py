"""Hot loops over CSR adjacency arrays.

Every kernel is written once in numba-compatible Python and compiled with
``numba.njit`` when numba is importable.  Setting ``SHORTCUTLAB_KERNELS=numpy``
disables compilation; the traversal kernels then switch to vectorised
numpy/scipy implementations and the remaining kernels run interpreted.
Both backends return identical results (parents are chosen by a fixed
lowest-id rule rather than by visit order, so they do not depend on the
traversal strategy).
"""

from __future__ import annotations

import heapq
import os

import numpy as np

INF = np.iinfo(np.int64).max // 4

_requested = os.environ.get("SHORTCUTLAB_KERNELS", "numba").strip().lower()

try:
    if _requested == "numpy":
        raise ImportError
    from numba import njit

    def kernel(fn):
        return njit(cache=True, nogil=True)(fn)

    BACKEND = "numba"
except ImportError:  # pragma: no cover - exercised via the env flag

    def kernel(fn):
        return fn

    BACKEND = "numpy"


# ---------------------------------------------------------------- BFS


@kernel
def _bfs_nb(indptr, indices, sources, expand):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    head = 0
    tail = 0
    for s in sources:
        if dist[s] == -1:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        if dist[v] > 0 and not expand[v]:
            continue
        dv = dist[v] + 1
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if dist[u] == -1:
                dist[u] = dv
                queue[tail] = u
                tail += 1
    return dist


@kernel
def _bfs_parents_nb(indptr, indices, dist, expand):
    n = indptr.shape[0] - 1
    parent = np.full(n, -1, np.int64)
    for v in range(n):
        dv = dist[v]
        if dv <= 0:
            continue
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if dist[u] == dv - 1 and (dist[u] == 0 or expand[u]):
                parent[v] = u
                break
    return parent


def _row_ids(indptr):
    return np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))


def _bfs_np(indptr, indices, sources, expand):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, np.int64)
    frontier = np.unique(np.asarray(sources, np.int64))
    dist[frontier] = 0
    level = 0
    while frontier.size:
        if level > 0:
            frontier = frontier[expand[frontier]]
        if not frontier.size:
            break
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        offs = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        nbrs = indices[np.arange(counts.sum()) + offs]
        nbrs = np.unique(nbrs[dist[nbrs] == -1])
        level += 1
        dist[nbrs] = level
        frontier = nbrs
    return dist


def _bfs_parents_np(indptr, indices, dist, expand):
    n = indptr.shape[0] - 1
    rows = _row_ids(indptr)
    du = dist[indices]
    ok = (dist[rows] > 0) & (du == dist[rows] - 1) & ((du == 0) | expand[indices])
    parent = np.full(n, -1, np.int64)
    r = rows[ok]
    first = np.unique(r, return_index=True)[1]
    parent[r[first]] = indices[ok][first]
    return parent


def bfs(indptr, indices, sources, expand=None, parents=False):
    """Multi-source BFS.

    Nodes with ``expand[v] == False`` are reached but not expanded (sources are
    always expanded).  Unreached nodes get distance -1.  The parent of a node is
    its lowest-id neighbour one level closer that was itself expanded.
    """
    n = indptr.shape[0] - 1
    sources = np.asarray(sources, np.int64)
    if expand is None:
        expand = np.ones(n, np.bool_)
    if BACKEND == "numba":
        dist = _bfs_nb(indptr, indices, sources, expand)
        if parents:
            return dist, _bfs_parents_nb(indptr, indices, dist, expand)
        return dist
    dist = _bfs_np(indptr, indices, sources, expand)
    if parents:
        return dist, _bfs_parents_np(indptr, indices, dist, expand)
    return dist


@kernel
def _eccentricity_many_nb(indptr, indices, sources):
    out = np.empty(sources.shape[0], np.int64)
    n = indptr.shape[0] - 1
    expand = np.ones(n, np.bool_)
    one = np.empty(1, np.int64)
    for i in range(sources.shape[0]):
        one[0] = sources[i]
        d = _bfs_nb(indptr, indices, one, expand)
        out[i] = d.max()
    return out


def eccentricities(indptr, indices, sources):
    sources = np.asarray(sources, np.int64)
    if BACKEND == "numba":
        return _eccentricity_many_nb(indptr, indices, sources)
    n = indptr.shape[0] - 1
    expand = np.ones(n, np.bool_)
    return np.array([_bfs_np(indptr, indices, [s], expand).max() for s in sources], np.int64)


# ---------------------------------------------------------------- Dijkstra


@kernel
def _dijkstra_nb(indptr, indices, weights, sources):
    n = indptr.shape[0] - 1
    dist = np.full(n, INF, np.int64)
    done = np.zeros(n, np.bool_)
    heap = [(np.int64(0), np.int64(0))]
    heap.pop()
    for s in sources:
        if dist[s] != 0:
            dist[s] = 0
            heapq.heappush(heap, (np.int64(0), np.int64(s)))
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            nd = d + weights[p]
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, np.int64(u)))
    return dist


@kernel
def _weighted_parents_nb(indptr, indices, weights, dist):
    n = indptr.shape[0] - 1
    parent = np.full(n, -1, np.int64)
    for v in range(n):
        dv = dist[v]
        if dv <= 0 or dv >= INF:
            continue
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if dist[u] < INF and dist[u] + weights[p] == dv:
                parent[v] = u
                break
    return parent


def _dijkstra_np(indptr, indices, weights, sources):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra as sp_dijkstra

    n = indptr.shape[0] - 1
    mat = csr_matrix((weights.astype(np.float64), indices, indptr), shape=(n, n))
    d = sp_dijkstra(mat, directed=True, indices=np.unique(sources), min_only=True)
    out = np.full(n, INF, np.int64)
    fin = np.isfinite(d)
    out[fin] = np.rint(d[fin]).astype(np.int64)
    return out


def _weighted_parents_np(indptr, indices, weights, dist):
    n = indptr.shape[0] - 1
    rows = _row_ids(indptr)
    du = dist[indices]
    dv = dist[rows]
    ok = (dv > 0) & (dv < INF) & (du < INF) & (du + weights == dv)
    parent = np.full(n, -1, np.int64)
    r = rows[ok]
    first = np.unique(r, return_index=True)[1]
    parent[r[first]] = indices[ok][first]
    return parent


def dijkstra(indptr, indices, weights, sources, parents=False):
    """Multi-source Dijkstra with integer weights given per CSR entry."""
    sources = np.asarray(sources, np.int64)
    weights = np.asarray(weights, np.int64)
    if BACKEND == "numba":
        dist = _dijkstra_nb(indptr, indices, weights, sources)
        if parents:
            return dist, _weighted_parents_nb(indptr, indices, weights, dist)
        return dist
    dist = _dijkstra_np(indptr, indices, weights, sources)
    if parents:
        return dist, _weighted_parents_np(indptr, indices, weights, dist)
    return dist


# ---------------------------------------------------------------- hop-bounded lightest paths


@kernel
def _hop_layers_nb(indptr, indices, weights, src, h):
    n = indptr.shape[0] - 1
    dist = np.full((h + 1, n), np.inf)
    pred = np.full((h + 1, n), -1, np.int64)
    dist[0, src] = 0.0
    for layer in range(1, h + 1):
        prev = dist[layer - 1]
        cur = dist[layer]
        for v in range(n):
            best = np.inf
            arg = -1
            for p in range(indptr[v], indptr[v + 1]):
                u = indices[p]
                c = prev[u] + weights[p]
                if c < best:
                    best = c
                    arg = u
            cur[v] = best
            pred[layer, v] = arg
    return dist, pred


def _hop_layers_np(indptr, indices, weights, src, h):
    n = indptr.shape[0] - 1
    rows = _row_ids(indptr)
    dist = np.full((h + 1, n), np.inf)
    pred = np.full((h + 1, n), -1, np.int64)
    dist[0, src] = 0.0
    starts = indptr[:-1]
    for layer in range(1, h + 1):
        cand = dist[layer - 1][indices] + weights
        best = np.minimum.reduceat(cand, starts)
        is_min = (cand == best[rows]) & np.isfinite(cand)
        r = rows[is_min]
        first = np.unique(r, return_index=True)[1]
        dist[layer] = best
        pred[layer, r[first]] = indices[is_min][first]
    return dist, pred


def hop_layers(indptr, indices, weights, src, h):
    """Lightest walks from ``src`` using exactly 0..h hops (layered expansion)."""
    weights = np.asarray(weights, np.float64)
    if BACKEND == "numba":
        return _hop_layers_nb(indptr, indices, weights, np.int64(src), np.int64(h))
    return _hop_layers_np(indptr, indices, weights, int(src), int(h))


# ---------------------------------------------------------------- batched connectivity


@kernel
def _find(par, x):
    root = x
    while par[root] != root:
        root = par[root]
    while par[x] != root:
        nxt = par[x]
        par[x] = root
        x = nxt
    return root


@kernel
def _connectivity_batch_nb(n, base, gated, masks):
    out = np.zeros(masks.shape[0], np.bool_)
    par = np.empty(n, np.int64)
    for b in range(masks.shape[0]):
        for i in range(n):
            par[i] = i
        comps = n
        for e in range(base.shape[0]):
            ra = _find(par, base[e, 0])
            rb = _find(par, base[e, 1])
            if ra != rb:
                par[ra] = rb
                comps -= 1
        for e in range(gated.shape[0]):
            if masks[b, e]:
                ra = _find(par, gated[e, 0])
                rb = _find(par, gated[e, 1])
                if ra != rb:
                    par[ra] = rb
                    comps -= 1
        out[b] = comps == 1
    return out


def connectivity_batch(n, base, gated, masks):
    """For each row of ``masks``, is (V, base + selected gated edges) connected?"""
    base = np.asarray(base, np.int64).reshape(-1, 2)
    gated = np.asarray(gated, np.int64).reshape(-1, 2)
    masks = np.asarray(masks, np.bool_)
    if BACKEND == "numba":
        return _connectivity_batch_nb(np.int64(n), base, gated, masks)
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    out = np.zeros(masks.shape[0], np.bool_)
    for b in range(masks.shape[0]):
        e = np.vstack([base, gated[masks[b]]])
        mat = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        out[b] = connected_components(mat, directed=False)[0] == 1
    return out


# ---------------------------------------------------------------- exhaustive moving cut


@kernel
def _set_distance_nb(indptr, indices, eid, lengths, sources, is_sink):
    d = _dijkstra_nb(indptr, indices, lengths[eid], sources)
    best = INF
    for v in range(d.shape[0]):
        if is_sink[v] and d[v] < best:
            best = d[v]
    return best


@kernel
def _exhaustive_cut_nb(indptr, indices, eid, m, sources, is_sink, budget, cap):
    excess = np.zeros(m, np.int64)
    lengths = np.ones(m, np.int64)
    best = _set_distance_nb(indptr, indices, eid, lengths, sources, is_sink)
    best_excess = excess.copy()
    count = 1
    total = 0
    # odometer over excess vectors with entries <= cap and sum <= budget
    while True:
        i = 0
        while i < m:
            if excess[i] < cap and total < budget:
                excess[i] += 1
                total += 1
                break
            total -= excess[i]
            excess[i] = 0
            i += 1
        if i == m:
            break
        count += 1
        for j in range(m):
            lengths[j] = 1 + excess[j]
        d = _set_distance_nb(indptr, indices, eid, lengths, sources, is_sink)
        if d > best:
            best = d
            best_excess[:] = excess
    return best, best_excess, count


def exhaustive_cut(indptr, indices, eid, m, sources, is_sink, budget, cap):
    """Enumerate every excess vector x (0 <= x_e <= cap, sum x <= budget).

    Returns the best set-distance, the first maximiser in odometer order and the
    number of vectors visited.
    """
    args = (
        indptr,
        indices,
        np.asarray(eid, np.int64),
        np.int64(m),
        np.asarray(sources, np.int64),
        np.asarray(is_sink, np.bool_),
        np.int64(budget),
        np.int64(cap),
    )
    if BACKEND == "numba":
        best, ex, count = _exhaustive_cut_nb(*args)
        return int(best), ex, int(count)
    return _exhaustive_cut_py(*args)


def _exhaustive_cut_py(indptr, indices, eid, m, sources, is_sink, budget, cap):
    def set_dist(lengths):
        d = _dijkstra_np(indptr, indices, lengths[eid], sources)
        return int(d[is_sink].min())

    excess = np.zeros(m, np.int64)
    best = set_dist(np.ones(m, np.int64))
    best_excess = excess.copy()
    count = 1
    total = 0
    while True:
        i = 0
        while i < m:
            if excess[i] < cap and total < budget:
                excess[i] += 1
                total += 1
                break
            total -= excess[i]
            excess[i] = 0
            i += 1
        if i == m:
            break
        count += 1
        d = set_dist(1 + excess)
        if d > best:
            best = d
            best_excess = excess.copy()
    return best, best_excess, count


# ---------------------------------------------------------------- unit-capacity min-cost flow
#
# Each CSR entry p = (v -> u) is an arc of capacity one and cost one; flow[p]
# marks a unit travelling v -> u.  Pushing v -> u while u -> v carries flow
# cancels it at cost -1.  All sources share potential 0; sinks drain for free.


@kernel
def _mcf_dijkstra_nb(indptr, indices, rev, flow, pi, init):
    n = indptr.shape[0] - 1
    dist = np.full(n, INF, np.int64)
    done = np.zeros(n, np.bool_)
    heap = [(np.int64(0), np.int64(0))]
    heap.pop()
    for s in range(n):
        if init[s] < INF:
            dist[s] = init[s]
            heapq.heappush(heap, (np.int64(init[s]), np.int64(s)))
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for p in range(indptr[v], indptr[v + 1]):
            if flow[p]:
                continue
            u = indices[p]
            cost = -1 if flow[rev[p]] else 1
            nd = d + cost + pi[v] - pi[u]
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, np.int64(u)))
    return dist


@kernel
def _mcf_augment_nb(indptr, indices, rev, flow, pi, pt, is_src, is_snk):
    n = indptr.shape[0] - 1
    pushed = 0
    level = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    it = np.empty(n, np.int64)
    stack = np.empty(n + 1, np.int64)
    via = np.empty(n + 1, np.int64)
    while True:
        level[:] = -1
        head = 0
        tail = 0
        for s in range(n):
            if is_src[s]:
                level[s] = 0
                queue[tail] = s
                tail += 1
        reach = False
        while head < tail:
            v = queue[head]
            head += 1
            if is_snk[v] and pi[v] == pt:
                reach = True
            for p in range(indptr[v], indptr[v + 1]):
                if flow[p]:
                    continue
                u = indices[p]
                cost = -1 if flow[rev[p]] else 1
                if level[u] == -1 and cost + pi[v] - pi[u] == 0:
                    level[u] = level[v] + 1
                    queue[tail] = u
                    tail += 1
        if not reach:
            break
        for v in range(n):
            it[v] = indptr[v]
        for s in range(n):
            if not is_src[s]:
                continue
            while True:
                # depth-first search for one augmenting path in the level graph
                top = 0
                stack[0] = s
                found = False
                while top >= 0:
                    v = stack[top]
                    if is_snk[v] and pi[v] == pt:
                        found = True
                        break
                    advanced = False
                    while it[v] < indptr[v + 1]:
                        p = it[v]
                        u = indices[p]
                        if not flow[p] and level[u] == level[v] + 1:
                            cost = -1 if flow[rev[p]] else 1
                            if cost + pi[v] - pi[u] == 0:
                                top += 1
                                stack[top] = u
                                via[top] = p
                                advanced = True
                                break
                        it[v] += 1
                    if not advanced:
                        level[v] = -2
                        top -= 1
                        if top >= 0:
                            it[stack[top]] += 1
                if not found:
                    break
                for j in range(1, top + 1):
                    p = via[j]
                    if flow[rev[p]]:
                        flow[rev[p]] = False
                    else:
                        flow[p] = True
                    it[stack[j - 1]] += 1
                pushed += 1
    return pushed


def mcf_dijkstra(indptr, indices, rev, flow, pi, init):
    """Reduced-cost distances in the residual network.

    ``init[v]`` is the starting reduced label of v (``INF`` for non-sources).
    """
    return _mcf_dijkstra_nb(indptr, indices, rev, flow, pi, np.asarray(init, np.int64))


def mcf_augment(indptr, indices, rev, flow, pi, pt, is_src, is_snk):
    return int(_mcf_augment_nb(indptr, indices, rev, flow, pi, np.int64(pt), is_src, is_snk))


@kernel
def reverse_entries(indptr, indices):
    """Position of the reverse CSR entry (u -> v) for every entry (v -> u)."""
    rev = np.empty(indices.shape[0], np.int64)
    n = indptr.shape[0] - 1
    for v in range(n):
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            lo = indptr[u]
            hi = indptr[u + 1]
            while lo < hi:
                mid = (lo + hi) // 2
                if indices[mid] < v:
                    lo = mid + 1
                else:
                    hi = mid
            rev[p] = lo
    return rev


# ---------------------------------------------------------------- set eccentricity


@kernel
def _set_ecc_nb(indptr, indices, nodes):
    n = indptr.shape[0] - 1
    expand = np.ones(n, np.bool_)
    one = np.empty(1, np.int64)
    best = 0
    for i in range(nodes.shape[0]):
        one[0] = nodes[i]
        d = _bfs_nb(indptr, indices, one, expand)
        for j in range(nodes.shape[0]):
            x = d[nodes[j]]
            if x < 0:
                return -1
            if x > best:
                best = x
    return best


def set_eccentricity(indptr, indices, nodes):
    """max_{u,v in nodes} dist(u, v), or -1 if some pair is disconnected."""
    nodes = np.asarray(nodes, np.int64)
    if nodes.size <= 1:
        return 0
    if BACKEND == "numba":
        return int(_set_ecc_nb(indptr, indices, nodes))
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    n = indptr.shape[0] - 1
    mat = csr_matrix((np.ones(indices.shape[0]), indices, indptr), shape=(n, n))
    d = shortest_path(mat, unweighted=True, indices=nodes)[:, nodes]
    if not np.isfinite(d).all():
        return -1
    return int(d.max())


# ---------------------------------------------------------------- hop-bounded best response


@kernel
def _best_response_nb(indptr, indices, eid, w, m, src, tptr, tgt, demand, h):
    """Lightest <=h-hop path for each (src[g], tgt[tptr[g]:tptr[g+1]]) commodity.

    Returns flat node lists (nodes, offsets), per-commodity weights and the
    demand-weighted edge load of the chosen paths.
    """
    n = indptr.shape[0] - 1
    ncom = tgt.shape[0]
    offsets = np.zeros(ncom + 1, np.int64)
    nodes = np.empty(ncom * (h + 1), np.int64)
    cost = np.empty(ncom, np.float64)
    load = np.zeros(m, np.float64)
    dist = np.empty((h + 1, n), np.float64)
    pred = np.empty((h + 1, n), np.int64)
    predp = np.empty((h + 1, n), np.int64)
    pos = 0
    for gi in range(src.shape[0]):
        s = src[gi]
        dist[:, :] = np.inf
        pred[:, :] = -1
        dist[0, s] = 0.0
        for layer in range(1, h + 1):
            for v in range(n):
                best = np.inf
                arg = -1
                argp = -1
                for p in range(indptr[v], indptr[v + 1]):
                    u = indices[p]
                    c = dist[layer - 1, u] + w[p]
                    if c < best:
                        best = c
                        arg = u
                        argp = p
                dist[layer, v] = best
                pred[layer, v] = arg
                predp[layer, v] = argp
        for j in range(tptr[gi], tptr[gi + 1]):
            t = tgt[j]
            bl = 0
            bd = dist[0, t]
            for layer in range(1, h + 1):
                if dist[layer, t] < bd:
                    bd = dist[layer, t]
                    bl = layer
            cost[j] = bd
            offsets[j] = pos
            if bd == np.inf:
                offsets[j + 1] = pos
                continue
            v = t
            end = pos + bl
            nodes[end] = t
            for layer in range(bl, 0, -1):
                load[eid[predp[layer, v]]] += demand[j]
                v = pred[layer, v]
                nodes[pos + layer - 1] = v
            pos = end + 1
            offsets[j + 1] = pos
    return nodes[:pos], offsets, cost, load


def best_response(indptr, indices, eid, w, m, src, tptr, tgt, demand, h):
    args = (
        indptr,
        indices,
        eid,
        np.asarray(w, np.float64),
        np.int64(m),
        np.asarray(src, np.int64),
        np.asarray(tptr, np.int64),
        np.asarray(tgt, np.int64),
        np.asarray(demand, np.float64),
        np.int64(h),
    )
    if BACKEND == "numba":
        return _best_response_nb(*args)
    return _best_response_np(*args)


def _best_response_np(indptr, indices, eid, w, m, src, tptr, tgt, demand, h):
    rows = _row_ids(indptr)
    ncom = tgt.shape[0]
    offsets = np.zeros(ncom + 1, np.int64)
    chunks = []
    cost = np.empty(ncom)
    load = np.zeros(m)
    pos = 0
    starts = indptr[:-1]
    for gi, s in enumerate(src):
        n = indptr.shape[0] - 1
        dist = np.full((h + 1, n), np.inf)
        predp = np.full((h + 1, n), -1, np.int64)
        dist[0, s] = 0.0
        for layer in range(1, h + 1):
            cand = dist[layer - 1][indices] + w
            best = np.minimum.reduceat(cand, starts)
            is_min = (cand == best[rows]) & np.isfinite(cand)
            r = rows[is_min]
            first = np.unique(r, return_index=True)[1]
            dist[layer] = best
            predp[layer, r[first]] = np.flatnonzero(is_min)[first]
        for j in range(tptr[gi], tptr[gi + 1]):
            t = tgt[j]
            bl = int(np.argmin(dist[:, t]))
            cost[j] = dist[bl, t]
            offsets[j] = pos
            if not np.isfinite(cost[j]):
                offsets[j + 1] = pos
                continue
            path = [t]
            for layer in range(bl, 0, -1):
                p = predp[layer, path[-1]]
                load[eid[p]] += demand[j]
                path.append(int(indices[p]))
            chunks.append(np.asarray(path[::-1], np.int64))
            pos += bl + 1
            offsets[j + 1] = pos
    nodes = np.concatenate(chunks) if chunks else np.zeros(0, np.int64)
    return nodes, offsets, cost, load
