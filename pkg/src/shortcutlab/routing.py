"""Hop-constrained min-congestion routing, routing schemes and path sampling.

``opt_h`` approximates the best fractional congestion achievable with paths of
at most ``h`` hops.  It runs Frank-Wolfe on the log-sum-exp smoothing of the
maximum edge load; the best-response oracle is an exact lightest ``<= h``-hop
path computed on the layered graph.  Every iteration also yields a dual
certificate ``sum_j d_j dist_w(s_j, t_j) / sum_e w_e`` which never exceeds the
true optimum, so callers get a sound lower bound along with the witness.

The hop-constrained *oblivious* routing that a faithful implementation would
use plugs in through :class:`RoutingScheme`; :func:`baseline_scheme` supplies
two simple stand-ins.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels as K
from .errors import Infeasible, ValidationError
from .graph import Graph, bfs_path
from .pairs import PairSet
from .shortcut import PairShortcut

Pair = tuple[int, int]


def _key(s: int, t: int) -> Pair:
    return (s, t) if s <= t else (t, s)


@dataclass
class Demand:
    """Nonnegative integer demand per unordered pair."""

    values: dict[Pair, int]

    def __init__(self, values: Mapping[Sequence[int], int]):
        acc: dict[Pair, int] = defaultdict(int)
        for (s, t), x in values.items():
            if x < 0:
                raise ValueError("demands must be nonnegative")
            if x and s != t:
                acc[_key(int(s), int(t))] += int(x)
        self.values = dict(sorted(acc.items()))

    @classmethod
    def unit(cls, pairs: Iterable[Sequence[int]]) -> "Demand":
        acc: dict[Pair, int] = defaultdict(int)
        for s, t in pairs:
            acc[(int(s), int(t))] += 1
        return cls(acc)

    @classmethod
    def all_pairs(cls, n: int) -> "Demand":
        return cls({(s, t): 1 for s in range(n) for t in range(s + 1, n)})

    def __len__(self) -> int:
        return len(self.values)


class RoutingScheme:
    """Finite path distribution per unordered pair.

    Paths are stored oriented from the smaller to the larger endpoint and
    reversed on lookup.  ``fallback`` (if given) builds a deterministic
    single-path entry for pairs that were not precomputed.
    """

    def __init__(
        self,
        g: Graph,
        dists: Mapping[Pair, Sequence[tuple[float, Sequence[int]]]],
        fallback: Callable[[int, int], Sequence[int]] | None = None,
    ):
        self.g = g
        self.dists: dict[Pair, list[tuple[float, tuple[int, ...]]]] = {}
        for (s, t), supp in dists.items():
            self._store(int(s), int(t), supp)
        self.fallback = fallback

    def _store(self, s, t, supp):
        key = _key(s, t)
        items = []
        for prob, path in supp:
            path = tuple(int(v) for v in path)
            if (s, t) != key:
                path = path[::-1]
            items.append((float(prob), path))
        total = sum(p for p, _ in items)
        if not items or abs(total - 1.0) > 1e-6:
            raise ValidationError(f"distribution for {key} sums to {total}")
        for prob, path in items:
            if path[0] != key[0] or path[-1] != key[1]:
                raise ValidationError(f"support path for {key} has wrong endpoints")
        self.dists[key] = items

    def distribution(self, s: int, t: int) -> list[tuple[float, tuple[int, ...]]]:
        key = _key(s, t)
        if key not in self.dists:
            if self.fallback is None:
                raise KeyError(f"scheme does not cover pair {key}")
            self._store(key[0], key[1], [(1.0, self.fallback(*key))])
        items = self.dists[key]
        if (s, t) == key:
            return items
        return [(p, path[::-1]) for p, path in items]

    @property
    def dilation(self) -> int:
        return max((len(path) - 1 for supp in self.dists.values() for _, path in supp), default=0)

    def covers(self, pairs: Iterable[Pair]) -> bool:
        return self.fallback is not None or all(_key(s, t) in self.dists for s, t in pairs)

    def to_json(self) -> str:
        out = []
        for (s, t), supp in self.dists.items():
            out.append({"s": s, "t": t, "paths": [{"prob": p, "nodes": list(path)} for p, path in supp]})
        return json.dumps({"pairs": out, "dilation": self.dilation})

    @classmethod
    def from_json(cls, g: Graph, text: str) -> "RoutingScheme":
        obj = json.loads(text)
        return cls(g, {(e["s"], e["t"]): [(p["prob"], p["nodes"]) for p in e["paths"]] for e in obj["pairs"]})


def scheme_congestion(d: Demand, r: RoutingScheme) -> float:
    """Exact expected max edge load: max_e sum_{s,t} D_st * Pr[e in p]."""
    g = r.g
    load = np.zeros(g.m)
    for (s, t), x in d.values.items():
        for prob, path in r.distribution(s, t):
            if len(path) > 1:
                ids = np.unique(g.edge_ids(np.column_stack([path[:-1], path[1:]])))
                load[ids] += x * prob
    return float(load.max(initial=0.0))


# ---------------------------------------------------------------- opt_h


@dataclass
class OptResult:
    value: float
    lower_bound: float
    scheme: RoutingScheme
    iterations: int
    h: int
    history: list[tuple[float, float]] = field(default_factory=list, repr=False)


def _commodities(g: Graph, d: Demand, h: int):
    keys = list(d.values)
    by_src: dict[int, list[int]] = defaultdict(list)
    for j, (s, _) in enumerate(keys):
        by_src[s].append(j)
    src = np.asarray(sorted(by_src), np.int64)
    order = [j for s in src.tolist() for j in by_src[s]]
    tptr = np.zeros(len(src) + 1, np.int64)
    np.cumsum([len(by_src[s]) for s in src.tolist()], out=tptr[1:])
    tgt = np.asarray([keys[j][1] for j in order], np.int64)
    dem = np.asarray([d.values[keys[j]] for j in order], np.float64)
    for s in src.tolist():
        dist = K.bfs(g.indptr, g.indices, [s])
        for j in by_src[s]:
            if dist[keys[j][1]] > h:
                raise Infeasible(f"pair {keys[j]} has hop distance {int(dist[keys[j][1]])} > h = {h}")
    return [keys[j] for j in order], src, tptr, tgt, dem


def opt_h(
    g: Graph,
    d: Demand,
    h: int,
    *,
    eps: float = 0.05,
    max_iter: int = 2000,
    min_iter: int = 1,
    solver: str = "lp",
) -> OptResult:
    """Approximate min congestion over routing schemes with dilation <= h.

    ``value`` is the congestion of the returned witness scheme and
    ``lower_bound`` a certified lower bound on the optimum.  ``solver="lp"``
    runs path-based column generation with the layered lightest-path oracle as
    pricing step (exact up to floating point); ``solver="mw"`` runs the
    Frank-Wolfe / multiplicative-weights loop.  Either stops once
    ``value <= (1 + eps) * lower_bound`` or after ``max_iter`` rounds.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    if not d.values:
        return OptResult(0.0, 0.0, RoutingScheme(g, {}), 0, h)
    keys, src, tptr, tgt, dem = _commodities(g, d, h)
    if solver == "lp":
        return _opt_h_lp(g, keys, src, tptr, tgt, dem, h, eps, max_iter)
    if solver != "mw":
        raise ValueError(f"unknown solver {solver!r}")
    m = g.m
    load = np.zeros(m)
    coef: list[dict[tuple[int, ...], float]] = [dict() for _ in keys]
    scale = 1.0
    lower = 0.0
    history = []
    it = 0
    value = math.inf
    log_m = math.log(max(m, 2))
    while it < max_iter:
        it += 1
        if it == 1:
            w = np.ones(m)
        else:
            # temperature tied to the current level keeps the softmax sharp
            eta = 2.0 * log_m / (eps * max(load.max(), 1e-12))
            w = np.exp(eta * (load - load.max())) + 1e-300
        nodes, offs, cost, br_load = K.best_response(g.indptr, g.indices, g.eid, w[g.eid], m, src, tptr, tgt, dem, h)
        lower = max(lower, float((dem * cost).sum() / w.sum()))
        gamma = 1.0 if it == 1 else 2.0 / (it + 1)
        if it > 1:
            # exact line search on the max-load objective along the segment
            gamma = _line_search(load, br_load, gamma)
        if gamma >= 1.0:
            coef = [dict() for _ in keys]
            scale = 1.0
        else:
            scale *= 1.0 - gamma
            if scale < 1e-200:
                for c in coef:
                    for p in c:
                        c[p] *= scale
                scale = 1.0
        add = gamma / scale
        for j in range(len(keys)):
            path = tuple(nodes[offs[j] : offs[j + 1]].tolist())
            coef[j][path] = coef[j].get(path, 0.0) + add
        load = (1.0 - gamma) * load + gamma * br_load
        value = float(load.max())
        history.append((value, lower))
        if it >= min_iter and value <= (1.0 + eps) * lower + 1e-12:
            break
    dists = {}
    for j, (s, t) in enumerate(keys):
        tot = sum(coef[j].values())
        dists[(s, t)] = [(c / tot, p) for p, c in sorted(coef[j].items()) if c / tot > 1e-12]
        renorm = sum(p for p, _ in dists[(s, t)])
        dists[(s, t)] = [(p / renorm, path) for p, path in dists[(s, t)]]
    scheme = RoutingScheme(g, dists)
    return OptResult(value, min(lower, value), scheme, it, h, history)


def _opt_h_lp(g, keys, src, tptr, tgt, dem, h, eps, max_iter) -> OptResult:
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    m = g.m
    ncom = len(keys)
    pool: list[tuple[int, tuple[int, ...], np.ndarray]] = []
    seen: set[tuple[int, tuple[int, ...]]] = set()

    def add_paths(nodes, offs, only=None):
        added = 0
        for j in range(ncom) if only is None else only:
            path = tuple(nodes[offs[j] : offs[j + 1]].tolist())
            if (j, path) in seen:
                continue
            seen.add((j, path))
            ids = np.unique(g.edge_ids(np.column_stack([path[:-1], path[1:]])))
            pool.append((j, path, ids))
            added += 1
        return added

    nodes, offs, _, _ = K.best_response(g.indptr, g.indices, g.eid, np.ones(m)[g.eid], m, src, tptr, tgt, dem, h)
    add_paths(nodes, offs)
    lower = 0.0
    it = 0
    history = []
    while True:
        it += 1
        P = len(pool)
        rows, cols = [], []
        for c, (_, _, ids) in enumerate(pool):
            rows.extend(ids.tolist())
            cols.extend([c] * len(ids))
        a_ub = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, P + 1)).tolil()
        a_ub[:, P] = -1.0
        a_eq = csr_matrix(
            (np.ones(P), ([j for j, _, _ in pool], np.arange(P))), shape=(ncom, P + 1)
        )
        cost = np.zeros(P + 1)
        cost[P] = 1.0
        res = linprog(
            cost,
            A_ub=a_ub.tocsr(),
            b_ub=np.zeros(m),
            A_eq=a_eq,
            b_eq=dem,
            bounds=[(0, None)] * (P + 1),
            method="highs",
        )
        if res.status != 0:
            raise RuntimeError(f"LP solver failed: {res.message}")
        z = float(res.x[P])
        y = np.maximum(-np.asarray(res.ineqlin.marginals), 0.0)
        if y.sum() <= 0:
            y = np.ones(m)
        w = y / y.sum() + 1e-9 / m
        nodes, offs, dist, _ = K.best_response(g.indptr, g.indices, g.eid, w[g.eid], m, src, tptr, tgt, dem, h)
        lower = max(lower, float((dem * dist).sum() / w.sum()))
        history.append((z, lower))
        if z <= (1.0 + eps) * lower + 1e-12 or it >= max_iter:
            break
        if not add_paths(nodes, offs):
            lower = max(lower, z * (1 - 1e-9))
            break
    x = res.x[:P]
    per: list[list[tuple[float, tuple[int, ...]]]] = [[] for _ in range(ncom)]
    for c, (j, path, _) in enumerate(pool):
        if x[c] > 1e-12 * dem[j]:
            per[j].append((x[c] / dem[j], path))
    dists = {}
    for j, key in enumerate(keys):
        tot = sum(p for p, _ in per[j])
        dists[key] = [(p / tot, path) for p, path in per[j]]
    scheme = RoutingScheme(g, dists)
    value = scheme_congestion(Demand(dict(zip(keys, dem.astype(int)))), scheme)
    return OptResult(value, min(lower, value), scheme, it, h, history)


def _line_search(load: np.ndarray, br: np.ndarray, default: float) -> float:
    """Minimise max_e ((1-g) load_e + g br_e) over g in [0, 1] (convex, piecewise linear)."""
    lo, hi = 0.0, 1.0
    f = lambda x: float(((1.0 - x) * load + x * br).max())  # noqa: E731
    for _ in range(40):
        a = lo + (hi - lo) / 3
        b = hi - (hi - lo) / 3
        if f(a) <= f(b):
            hi = b
        else:
            lo = a
    best = (lo + hi) / 2
    return best if f(best) <= f(default) else default


def opt_h_profile(g: Graph, d: Demand, hs: Iterable[int], **kw) -> dict[int, tuple[float, float]]:
    """(value, lower_bound) per h, made monotone across h.

    A witness for a smaller h is also valid for every larger h, and a lower
    bound for a larger h also bounds every smaller h, so the raw estimates are
    tightened by a running min (values) and a reverse running max (bounds).
    """
    hs = sorted(set(hs))
    raw = {}
    for h in hs:
        try:
            r = opt_h(g, d, h, **kw)
            raw[h] = (r.value, r.lower_bound)
        except Infeasible:
            raw[h] = (math.inf, math.inf)
    out = {}
    best = math.inf
    for h in hs:
        best = min(best, raw[h][0])
        out[h] = [best, raw[h][1]]
    lb = 0.0
    for h in reversed(hs):
        lb = max(lb, out[h][1])
        out[h][1] = min(lb, out[h][0])
    return {h: (v, b) for h, (v, b) in out.items()}


# ---------------------------------------------------------------- schemes and sampling


def sample_shortcuts(r: RoutingScheme, s: PairSet, seed: int) -> PairShortcut:
    """Draw one path per pair, independently, from the scheme."""
    rng = np.random.default_rng(seed)
    paths = []
    for a, b in s:
        if a == b:
            paths.append([a])
            continue
        supp = r.distribution(a, b)
        probs = np.asarray([p for p, _ in supp])
        i = int(rng.choice(len(supp), p=probs / probs.sum())) if len(supp) > 1 else 0
        rng.random()  # keep one draw per pair regardless of support size
        paths.append(list(supp[i][1]))
    return PairShortcut(paths)


def baseline_scheme(
    g: Graph,
    h: int,
    kind: str = "shortest",
    *,
    pairs: Iterable[Pair] | None = None,
    eps: float = 0.05,
    max_iter: int = 2000,
) -> RoutingScheme:
    """Stand-in routing schemes.

    ``shortest`` routes every pair on its lowest-id BFS path (requires
    ``h >= diameter`` so that every pair is routable).  ``mw-spread`` is the
    ``opt_h`` witness for the uniform all-pairs demand, or for ``pairs`` when
    given; pairs outside that demand fall back to BFS paths.
    """
    from .graph import diameter

    def bfs_fallback(a, b):
        return bfs_path(g, a, b)

    if kind == "shortest":
        if pairs is None and h < diameter(g):
            raise Infeasible(f"h = {h} is below the diameter")
        scheme = RoutingScheme(g, {}, fallback=bfs_fallback)
        for a, b in pairs or ():
            if a != b:
                path = scheme.distribution(a, b)[0][1]
                if len(path) - 1 > h:
                    raise Infeasible(f"pair {(a, b)} has hop distance {len(path) - 1} > h = {h}")
        return scheme
    if kind == "mw-spread":
        demand = Demand.unit(pairs) if pairs is not None else Demand.all_pairs(g.n)
        res = opt_h(g, demand, h, eps=eps, max_iter=max_iter)
        return RoutingScheme(g, res.scheme.dists, fallback=bfs_fallback)
    raise ValueError(f"unknown scheme kind {kind!r}")


def routing_oracle(g: Graph, seed: int = 0, *, stretch: int = 2, eps: float = 0.1, max_iter: int = 300):
    """Pairwise oracle: sample from the opt_h witness for the requested pairs."""

    def oracle(ps: PairSet) -> PairShortcut:
        live = [(a, b) for a, b in ps if a != b]
        if not live:
            return PairShortcut([[a] for a, _ in ps])
        hop = max(int(K.bfs(g.indptr, g.indices, [a])[b]) for a, b in live)
        scheme = baseline_scheme(g, max(1, stretch * hop), "mw-spread", pairs=live, eps=eps, max_iter=max_iter)
        return sample_shortcuts(scheme, ps, seed)

    return oracle


def write_scheme(r: RoutingScheme, path: str | Path) -> None:
    Path(path).write_text(r.to_json())
