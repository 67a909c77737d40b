"""Moving cuts: integer edge lengths with a capacity budget and a source-sink distance.

Two LP back ends are available for :func:`search`.

* ``cutting-plane`` solves ``max t`` subject to ``l(P) >= t`` for every
  source-sink path, ``sum(l_e - 1) <= k - 1`` and ``l >= 1`` with
  ``scipy.optimize.linprog``, adding the currently shortest path as a new
  constraint until none is violated.

* ``flow`` uses LP duality.  The least capacity that pushes the source-sink
  distance up to ``t`` equals ``max_F (t |F| - cost(F))`` over unit-capacity
  flows ``F`` from sources to sinks, i.e. ``g(t) = sum_i max(0, t - d_i)``
  where ``d_1 <= d_2 <= ...`` are the successive shortest augmenting path
  costs.  The fractional optimum solves ``g(t) = k - 1``; because the
  potentials of the residual network are integral, every integer ``t`` with
  ``g(t) <= k - 1`` is met by an integer cut of capacity exactly ``g(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import Infeasible
from .graph import Graph, bfs_path, parse_graph
from .pairs import PairSet

SCALE_LADDER = (1.5, 2, 3, 4)


class MovingCut:
    """Integer lengths >= 1 on the edges of ``g`` (indexed by edge id)."""

    __slots__ = ("g", "lengths", "_capacity")

    def __init__(self, g: Graph, lengths):
        arr = np.asarray(lengths, np.int64).copy()
        if arr.shape != (g.m,):
            raise ValueError(f"need one length per edge ({g.m}), got shape {arr.shape}")
        if arr.size and arr.min() < 1:
            raise ValueError("moving-cut lengths must be integers >= 1")
        arr.setflags(write=False)
        self.g = g
        self.lengths = arr
        self._capacity = int((arr - 1).sum())

    @classmethod
    def unit(cls, g: Graph) -> "MovingCut":
        return cls(g, np.ones(g.m, np.int64))

    @property
    def capacity(self) -> int:
        return self._capacity

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {self.g.edge(e): int(x) for e, x in enumerate(self.lengths)}

    def __repr__(self) -> str:
        return f"MovingCut(m={self.g.m}, capacity={self.capacity})"


def capacity(mc: MovingCut) -> int:
    return int((mc.lengths - 1).sum())


def _dist_from(g: Graph, lengths: np.ndarray, sources) -> np.ndarray:
    return K.dijkstra(g.indptr, g.indices, lengths[g.eid], sorted(set(sources)))


def distance(g: Graph, mc: MovingCut, s: PairSet) -> int:
    """l-distance between the full source set and the full sink set."""
    d = _dist_from(g, mc.lengths, s.sources)
    return int(d[sorted(set(s.sinks))].min())


def pair_distances(g: Graph, mc: MovingCut, s: PairSet) -> list[int]:
    """l-distance of each pair (s_i, t_i) on its own."""
    cache: dict[int, np.ndarray] = {}
    out = []
    for a, b in s:
        if a not in cache:
            cache[a] = _dist_from(g, mc.lengths, [a])
        out.append(int(cache[a][b]))
    return out


@dataclass(frozen=True)
class CutReport:
    ok: bool
    capacity: int
    distance: int
    capacity_ok: bool
    distance_ok: bool
    reason: str = ""


def validate(g: Graph, mc: MovingCut, s: PairSet, k: int | None = None, beta: int | None = None) -> CutReport:
    """Capacity strictly below ``k`` (default |S|) and distance at least ``beta``."""
    k = s.k if k is None else k
    cap = capacity(mc)
    dist = distance(g, mc, s)
    cap_ok = cap < k
    dist_ok = beta is None or dist >= beta
    reasons = []
    if not cap_ok:
        reasons.append(f"capacity {cap} is not below k = {k}")
    if not dist_ok:
        reasons.append(f"distance {dist} is below the claimed {beta}")
    return CutReport(cap_ok and dist_ok, cap, dist, cap_ok, dist_ok, "; ".join(reasons))


def _as_fraction(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


def scale(mc: MovingCut, c) -> MovingCut:
    """``l'_e = 1 + floor((l_e - 1) / c)``: capacity <= gamma/c, distance >= beta/(1+c)."""
    c = _as_fraction(c)
    if c < 1:
        raise ValueError("scale factor must be >= 1")
    ex = mc.lengths - 1
    scaled = 1 + (ex * c.denominator) // c.numerator
    return MovingCut(mc.g, scaled)


# ---------------------------------------------------------------- exhaustive search


def count_vectors(m: int, cap: int, budget: int) -> int:
    """Number of x in {0..cap}^m with sum(x) <= budget."""
    budget = min(budget, m * cap)
    ways = [1] + [0] * budget
    for _ in range(m):
        new = [0] * (budget + 1)
        run = 0
        for s in range(budget + 1):
            run += ways[s]
            if s - cap - 1 >= 0:
                run -= ways[s - cap - 1]
            new[s] = run
        ways = new
    return sum(ways)


@dataclass
class SearchResult:
    cut: MovingCut
    beta: int
    mode: str
    k: int
    upper_bound: float | None = None
    c_round: Fraction | None = None
    solver: str | None = None
    iterations: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def capacity(self) -> int:
        return self.cut.capacity


def _trivial(g: Graph, s: PairSet) -> bool:
    return bool(set(s.sources) & set(s.sinks))


def _search_exact(g: Graph, s: PairSet, k: int, lmax: int, limit: int) -> SearchResult:
    budget = k - 1
    total = count_vectors(g.m, lmax - 1, budget)
    if total > limit:
        raise ValueError(f"exhaustive search needs {total} length vectors (limit {limit})")
    is_sink = np.zeros(g.n, np.bool_)
    is_sink[s.sinks] = True
    best, ex, count = K.exhaustive_cut(
        g.indptr, g.indices, g.eid, g.m, sorted(set(s.sources)), is_sink, budget, lmax - 1
    )
    cut = MovingCut(g, 1 + np.asarray(ex))
    return SearchResult(cut, int(best), "exact", k, extras={"vectors": int(count), "lmax": lmax})


# ---------------------------------------------------------------- LP: cutting planes


def _shortest_sink_path(g: Graph, lengths: np.ndarray, sources, sinks) -> tuple[float, list[int]]:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    mat = csr_matrix((lengths[g.eid], g.indices, g.indptr), shape=(g.n, g.n))
    dist, pred, src = dijkstra(mat, directed=True, indices=sorted(set(sources)), min_only=True, return_predecessors=True)
    sinks = np.asarray(sorted(set(sinks)))
    t = int(sinks[np.argmin(dist[sinks])])
    path = [t]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return float(dist[t]), path[::-1]


def _lp_cutting_plane(g: Graph, s: PairSet, k: int, max_iter: int, tol: float = 1e-6):
    from scipy.optimize import linprog

    m = g.m
    budget = k - 1
    rows: list[np.ndarray] = []
    seen: set[bytes] = set()

    def add(path):
        ids = np.unique(g.edge_ids(np.column_stack([path[:-1], path[1:]])))
        key = ids.tobytes()
        if key not in seen:
            seen.add(key)
            rows.append(ids)
            return True
        return False

    for a in sorted(set(s.sources)):
        for b in sorted(set(s.sinks)):
            add(bfs_path(g, a, b))
    it = 0
    lengths = np.ones(m)
    t = 0.0
    while it < max_iter:
        it += 1
        a_ub = np.zeros((len(rows) + 1, m + 1))
        for r, ids in enumerate(rows):
            a_ub[r, ids] = -1.0
            a_ub[r, m] = 1.0
        a_ub[-1, :m] = 1.0
        b_ub = np.zeros(len(rows) + 1)
        b_ub[-1] = budget + m
        cost = np.zeros(m + 1)
        cost[m] = -1.0
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(1, None)] * m + [(0, None)], method="highs")
        if res.status != 0:
            raise RuntimeError(f"LP solver failed: {res.message}")
        lengths = res.x[:m]
        t = float(res.x[m])
        d, path = _shortest_sink_path(g, lengths, s.sources, s.sinks)
        if d >= t - tol or not add(path):
            break
    return t, lengths, it


# ---------------------------------------------------------------- LP: flow duality


class _UnitFlow:
    """Successive shortest paths for unit-capacity, unit-cost undirected flow."""

    def __init__(self, g: Graph, sources, sinks):
        self.g = g
        self.rev = K.reverse_entries(g.indptr, g.indices)
        self.flow = np.zeros(len(g.indices), np.bool_)
        self.pi = np.zeros(g.n, np.int64)
        self.is_src = np.zeros(g.n, np.bool_)
        self.is_src[list(sources)] = True
        self.is_snk = np.zeros(g.n, np.bool_)
        self.is_snk[list(sinks)] = True
        self.costs: list[int] = []
        self.exhausted = False

    def _dist(self, init=None) -> np.ndarray:
        if init is None:
            init = np.where(self.is_src, 0, K.INF)
        return K.mcf_dijkstra(self.g.indptr, self.g.indices, self.rev, self.flow, self.pi, init)

    def next_cost(self) -> int | None:
        """Cost of the next augmenting path (potentials updated), or None."""
        d = self._dist()
        reach = d[self.is_snk]
        if not reach.size or reach.min() >= K.INF:
            self.exhausted = True
            return None
        D = int(reach.min())
        self.pi = self.pi + np.minimum(d, D)
        return int(self.pi[self.is_snk].min())

    def augment(self, pt: int) -> int:
        pushed = K.mcf_augment(self.g.indptr, self.g.indices, self.rev, self.flow, self.pi, pt, self.is_src, self.is_snk)
        self.costs.extend([pt] * pushed)
        return pushed

    def residual_distance(self) -> np.ndarray:
        d = self._dist()
        return np.where(d >= K.INF, K.INF, d + self.pi)

    def cut_potential(self, beta: int) -> np.ndarray:
        """Residual distance from the sources, with a super-sink pinned at ``beta``.

        The super-sink reaches every sink that absorbs flow at cost 0 and from
        there walks flow edges backwards, so flow paths telescope exactly from
        0 to ``beta``.  Requires every augmenting path cheaper than ``beta``
        to have been used.
        """
        g = self.g
        rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
        net = np.bincount(g.indices[self.flow], minlength=g.n) - np.bincount(rows[self.flow], minlength=g.n)
        absorbing = self.is_snk & (net > 0)
        from_src = self.residual_distance()
        init = np.where(absorbing, beta - self.pi, K.INF)
        d = self._dist(init)
        from_sink = np.where(d >= K.INF, K.INF, d + self.pi)
        return np.minimum(np.minimum(from_src, from_sink), beta)


def _g_of(costs: Sequence[int], t: float) -> float:
    return float(sum(max(0.0, t - c) for c in costs))


def _flow_solve(g: Graph, s: PairSet, budget: int | None, beta: int | None = None):
    """Run SSP until the budget (or target distance) is decided.

    Returns (fractional optimum t*, flow object).  With ``beta`` given, stops
    once every augmenting path cheaper than ``beta`` has been used.
    """
    uf = _UnitFlow(g, set(s.sources), set(s.sinks))
    stop_at = math.inf
    while True:
        pt = uf.next_cost()
        if pt is None:
            break
        if beta is not None:
            if pt >= beta:
                break
        elif _g_of(uf.costs, pt) >= budget:
            stop_at = pt
            break
        if uf.augment(pt) == 0:  # pragma: no cover - defensive
            break
    if beta is not None:
        return None, uf
    # g is piecewise linear with breakpoints at the unit costs; every unit
    # cheaper than stop_at is already in uf.costs
    t_star = math.inf
    acc = 0
    for i, c in enumerate(uf.costs):
        acc += c
        t = (budget + acc) / (i + 1)
        nxt = uf.costs[i + 1] if i + 1 < len(uf.costs) else math.inf
        if t <= nxt:
            t_star = t
            break
    return min(t_star, stop_at), uf


def _cut_from_flow(g: Graph, uf: _UnitFlow, beta: int) -> MovingCut:
    phi = uf.cut_potential(beta)
    diff = np.abs(phi[g.edges[:, 0]] - phi[g.edges[:, 1]])
    return MovingCut(g, np.maximum(1, diff))


def min_capacity_cut(g: Graph, s: PairSet, beta: int) -> MovingCut:
    """Least-capacity integer cut with set distance >= ``beta``."""
    if beta <= 0 or _trivial(g, s):
        if beta > 0:
            raise Infeasible("a source is also a sink; distance is always 0")
        return MovingCut.unit(g)
    _, uf = _flow_solve(g, s, None, beta=beta)
    return _cut_from_flow(g, uf, beta)


# ---------------------------------------------------------------- search


def _repair(g: Graph, s: PairSet, cut: MovingCut, k: int) -> tuple[MovingCut, Fraction]:
    if cut.capacity < k:
        return cut, Fraction(1)
    ladder = list(SCALE_LADDER)
    c = ladder[-1]
    while True:
        for c in ladder:
            out = scale(cut, c)
            if out.capacity < k:
                return out, _as_fraction(c)
        c = ladder[-1] + 1
        ladder = [c]


def search(
    g: Graph,
    s: PairSet,
    mode: str = "lp",
    *,
    k: int | None = None,
    lmax: int = 4,
    solver: str = "auto",
    max_iter: int = 500,
    limit: int = 20_000_000,
) -> SearchResult:
    """Find a moving cut of capacity < k (default |S|) with large set distance.

    ``exact`` enumerates every length vector in {1..lmax}^E within the
    capacity budget.  ``lp`` solves the fractional relaxation (``solver`` is
    ``cutting-plane``, ``flow`` or ``auto``), rounds lengths up and repairs a
    capacity overflow by scaling; ``upper_bound`` holds the fractional
    optimum and ``c_round`` the repair factor (1 when none was needed).
    """
    k = s.k if k is None else k
    if k < 1:
        raise Infeasible("k must be >= 1")
    if not s.k:
        raise ValueError("empty pair set")
    if _trivial(g, s):
        return SearchResult(MovingCut.unit(g), 0, mode, k, upper_bound=0.0, c_round=Fraction(1))
    if mode == "exact":
        return _search_exact(g, s, k, lmax, limit)
    if mode != "lp":
        raise ValueError(f"unknown mode {mode!r}")
    if solver == "auto":
        n_src, n_snk = len(set(s.sources)), len(set(s.sinks))
        solver = "cutting-plane" if g.m <= 400 and n_src * n_snk <= 400 else "flow"
    if solver == "flow":
        t_star, uf = _flow_solve(g, s, k - 1)
        if math.isinf(t_star):  # pragma: no cover - sources and sinks always connected
            raise Infeasible("sources and sinks are disconnected")
        beta = int(math.floor(t_star + 1e-9))
        _, uf = _flow_solve(g, s, None, beta=beta)
        cut = _cut_from_flow(g, uf, beta)
        res = SearchResult(cut, distance(g, cut, s), "lp", k, t_star, Fraction(1), "flow", len(uf.costs))
        res.extras["flow_costs"] = list(uf.costs)
        return res
    if solver != "cutting-plane":
        raise ValueError(f"unknown solver {solver!r}")
    t, frac, it = _lp_cutting_plane(g, s, k, max_iter)
    rounded = MovingCut(g, np.ceil(frac - 1e-9).astype(np.int64))
    cut, c = _repair(g, s, rounded, k)
    res = SearchResult(cut, distance(g, cut, s), "lp", k, t, c, "cutting-plane", it)
    res.extras["fractional_lengths"] = frac
    return res


def mc_of_graph_estimate(
    g: Graph,
    sampler: Callable[[int], PairSet],
    trials: int,
    mode: str = "lp",
    **kw,
) -> dict:
    """Lower estimate of MC(G): the best search distance over sampled pair sets."""
    best = 0
    for i in range(trials):
        s = sampler(i)
        if s.k:
            best = max(best, search(g, s, mode, **kw).beta)
    return {"estimate": best, "kind": "lower", "trials": trials}


# ---------------------------------------------------------------- files


def write_cut(mc: MovingCut, path: str | Path) -> None:
    Path(path).write_text("".join(f"{u} {v} {x}\n" for (u, v), x in zip(mc.g.edges.tolist(), mc.lengths.tolist())))


def read_cut(g: Graph, path: str | Path) -> MovingCut:
    lengths = np.ones(g.m, np.int64)
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if rows:
        arr = np.asarray(rows, np.int64)
        lengths[g.edge_ids(arr[:, :2])] = arr[:, 2]
    return MovingCut(g, lengths)


def cut_from_graph_text(text: str) -> tuple[Graph, MovingCut]:
    g, extra = parse_graph(text)
    return g, MovingCut(g, extra if extra is not None else np.ones(g.m, np.int64))
