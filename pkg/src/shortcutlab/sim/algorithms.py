"""Distributed algorithms run inside the simulator.

Every algorithm drives a :class:`~.core.Network` through a sequence of
phases.  A phase whose length is not fixed in advance ends when the network
falls quiet and is followed by a barrier on the global BFS tree, so that the
next phase starts simultaneously everywhere; the barrier's messages are part
of the trace like any other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import NonTermination, ValidationError
from ..graph import Graph, bfs_distances, bfs_path, diameter, heavy_light, log2ceil
from ..pairs import PairSet
from ..routing import RoutingScheme, sample_shortcuts
from ..shortcut import (
    PairShortcut,
    Partition,
    Quality,
    Shortcut,
    lift_pairs_to_parts,
    measure_pair_shortcut,
    measure_shortcut,
)
from .core import NodeProgram, Network, Send, SimConfig, Trace, shared_coin, shared_rng, value_bits, word_bits

ShortcutProvider = Callable[[Graph, Partition], Shortcut]


def _sync(net: Network, mark: int) -> None:
    """Barrier after a quiescence-terminated phase, skipped if it sent nothing."""
    if len(net.trace.records) > mark:
        net.barrier()


# ---------------------------------------------------------------- warm-ups


class Echo(NodeProgram):
    """Every node sends its id to its neighbours and outputs what it heard."""

    name = "echo"

    def on_round(self, ctx, st, inbox):
        if st is None:
            return "sent", [Send(u, ctx.id, word_bits(ctx.n)) for u in ctx.neighbors], None
        if inbox or not ctx.neighbors:
            return st, (), tuple(sorted(u for u, _ in inbox))
        return st, (), None


class BFSFlood(NodeProgram):
    """Hop distance from ``source``: each node outputs on first contact and forwards."""

    name = "bfs-flood"

    def __init__(self, source: int = 0):
        self.source = source

    def on_round(self, ctx, st, inbox):
        bits = word_bits(ctx.n)
        if ctx.id == self.source and st is None:
            return 0, [Send(u, 0, bits) for u in ctx.neighbors], 0
        if inbox:
            d = min(x for _, x in inbox) + 1
            return d, [Send(u, d, bits) for u in ctx.neighbors], d
        return st, (), None


# ---------------------------------------------------------------- part-wise aggregation


def part_links(g: Graph, part_of: np.ndarray, edge_sets: Sequence[np.ndarray] = ()) -> list[dict[int, list[int]]]:
    """Per node and part j, the neighbours reachable over edges of G[P_j] + H_j.

    This is the local knowledge a node has about the parts: its own part id,
    whether each incident edge stays inside it, and which shortcut edge sets
    use each incident edge.
    """
    links: list[dict[int, set[int]]] = [dict() for _ in range(g.n)]

    def add(e, j):
        a, b = (int(x) for x in g.edges[e])
        links[a].setdefault(j, set()).add(b)
        links[b].setdefault(j, set()).add(a)

    pa = part_of[g.edges[:, 0]]
    for e in np.flatnonzero((pa >= 0) & (pa == part_of[g.edges[:, 1]])).tolist():
        add(e, int(pa[e]))
    for j, h in enumerate(edge_sets):
        for e in np.asarray(h).tolist():
            add(e, j)
    return [{j: sorted(s) for j, s in d.items()} for d in links]


class _ValueFlood(NodeProgram):
    name = "aggregate-flood"

    def __init__(self, links, part_of, values, op, word):
        self.links, self.part_of, self.values, self.word = links, part_of, values, word
        self.better = (lambda a, b: a < b) if op == "min" else (lambda a, b: a > b)

    def init(self, ctx):
        j, x = int(self.part_of[ctx.id]), self.values[ctx.id]
        return {j: x} if j >= 0 and x is not None else {}

    def on_round(self, ctx, best, inbox):
        v = ctx.id
        if ctx.first:
            changed = {j: -1 for j in best}
        else:
            changed = {}
            for u, (j, x) in inbox:
                if j not in best or self.better(x, best[j]):
                    best[j] = x
                    changed[j] = u
        out = []
        for j, src in sorted(changed.items()):
            x = best[j]
            for u in self.links[v].get(j, ()):
                if u != src:
                    out.append(Send(u, (j, x), self.word + value_bits(x), (j,), True))
        return best, out, None

    def finish(self, ctx, best):
        return best.get(int(self.part_of[ctx.id]))


class _LeaderFlood(NodeProgram):
    """Lexicographic (leader, hops, parent) flood: a BFS tree from the lowest id per part."""

    name = "aggregate-tree"

    def __init__(self, links, part_of, word):
        self.links, self.part_of, self.word = links, part_of, word

    def init(self, ctx):
        j = int(self.part_of[ctx.id])
        return {j: (ctx.id, 0, -1)} if j >= 0 else {}

    def on_round(self, ctx, tree, inbox):
        v = ctx.id
        if ctx.first:
            changed = {j: -1 for j in tree}
        else:
            changed = {}
            for u, (j, lead, d) in inbox:
                cand = (lead, d + 1, u)
                if j not in tree or cand < tree[j]:
                    tree[j] = cand
                    changed[j] = u
        out = []
        for j, src in sorted(changed.items()):
            lead, d, _ = tree[j]
            for u in self.links[v].get(j, ()):
                if u != src:
                    out.append(Send(u, (j, lead, d), 3 * self.word, (j,), True))
        return tree, out, None

    def finish(self, ctx, tree):
        return tree or None


class _Notify(NodeProgram):
    name = "aggregate-children"

    def __init__(self, trees, word):
        self.trees, self.word = trees, word

    def init(self, ctx):
        return {}

    def on_round(self, ctx, kids, inbox):
        if ctx.first:
            tree = self.trees.get(ctx.id, {})
            out = [Send(p, j, self.word, (j,)) for j, (_, _, p) in sorted(tree.items()) if p >= 0]
            return kids, out, None
        for u, j in inbox:
            kids.setdefault(j, []).append(u)
        return kids, (), None

    def finish(self, ctx, kids):
        return kids


class _Converge(NodeProgram):
    """Sum up each part tree, then broadcast the total back down."""

    name = "aggregate-sum"

    def __init__(self, trees, kids, part_of, values, word):
        self.trees, self.kids, self.part_of, self.values, self.word = trees, kids, part_of, values, word

    def init(self, ctx):
        v = ctx.id
        st = {}
        for j, (_, _, p) in self.trees.get(v, {}).items():
            own = self.values[v] if self.part_of[v] == j and self.values[v] is not None else 0
            st[j] = [len(self.kids.get(v, {}).get(j, ())), own, p, None]
        return st

    def _up(self, v, j, rec, out):
        wait, acc, p, _ = rec
        if p >= 0:
            out.append(Send(p, ("up", j, acc), 1 + self.word + value_bits(acc), (j,), True))
        else:
            self._down(v, j, rec, acc, out)

    def _down(self, v, j, rec, total, out):
        rec[3] = total
        for c in self.kids.get(v, {}).get(j, ()):
            out.append(Send(c, ("down", j, total), 1 + self.word + value_bits(total), (j,), True))

    def on_round(self, ctx, st, inbox):
        v = ctx.id
        out: list[Send] = []
        if ctx.first:
            for j in sorted(st):
                if st[j][0] == 0:
                    self._up(v, j, st[j], out)
            return st, out, None
        for _, (kind, j, x) in inbox:
            rec = st[j]
            if kind == "up":
                rec[0] -= 1
                rec[1] += x
                if rec[0] == 0:
                    self._up(v, j, rec, out)
            else:
                self._down(v, j, rec, x, out)
        return st, out, None

    def finish(self, ctx, st):
        j = int(self.part_of[ctx.id])
        return st[j][3] if j >= 0 and j in st else None


def _aggregate(net: Network, part_of: np.ndarray, links, values: Sequence[Any], op: str) -> dict[int, Any]:
    word = net.word
    if op in ("min", "max"):
        mark = len(net.trace.records)
        out = net.execute(_ValueFlood(links, part_of, values, op, word), label=f"aggregate-{op}")
        _sync(net, mark)
        return out
    if op != "sum":
        raise ValueError(f"unknown aggregate {op!r}")
    mark = len(net.trace.records)
    trees = net.execute(_LeaderFlood(links, part_of, word))
    _sync(net, mark)
    mark = len(net.trace.records)
    kids = net.execute(_Notify(trees, word))
    _sync(net, mark)
    mark = len(net.trace.records)
    out = net.execute(_Converge(trees, kids, part_of, values, word))
    _sync(net, mark)
    return out


@dataclass
class AggregateResult:
    outputs: dict[int, Any]
    rounds: int
    quality: Quality
    trace: Trace


def partwise_aggregate(
    g: Graph,
    cfg: SimConfig,
    parts: Partition,
    sc: Shortcut | None,
    values: Sequence[int],
    op: str,
    *,
    net: Network | None = None,
) -> AggregateResult:
    """Every node of P_i learns ``op`` over the values of P_i.

    ``min`` and ``max`` flood improving values over G[P_i] + H_i; ``sum``
    builds a BFS tree per part the same way and then converges and
    broadcasts along it.  Values must be non-negative integers.
    """
    if sc is None:
        sc = Shortcut.empty(parts.k)
    quality = measure_shortcut(g, parts, sc)
    vals = [None if x is None else int(x) for x in values]
    if any(x is not None and x < 0 for x in vals):
        raise ValueError("aggregated values must be non-negative")
    net = net or Network(g, cfg)
    start = net.round
    out = _aggregate(net, parts.part_of, part_links(g, parts.part_of, sc.edge_sets), vals, op)
    return AggregateResult(out, net.round - start, quality, net.trace)


# ---------------------------------------------------------------- component growing


class _Exchange(NodeProgram):
    """One round: tell each listed neighbour a value."""

    name = "exchange"

    def __init__(self, nbrs, values, word):
        self.nbrs, self.values, self.word = nbrs, values, word

    def on_round(self, ctx, st, inbox):
        if st is None:
            x = self.values[ctx.id]
            return {}, [Send(u, x, self.word) for u in self.nbrs[ctx.id]], None
        for u, x in inbox:
            st[u] = x
        return st, (), None

    def finish(self, ctx, st):
        return st


def _exchange(net: Network, nbrs, values) -> list[dict[int, Any]]:
    busy = any(nbrs)
    out = net.execute(_Exchange(nbrs, values, net.word), label="exchange", deadline=1 if busy else 0)
    return [out.get(v) or {} for v in range(net.n)]


@dataclass
class GrowResult:
    comp: list[int]
    chosen: list[int]
    phases: int
    qualities: list[Quality]


def _grow(
    net: Network,
    mask: np.ndarray,
    keys: np.ndarray,
    provider: ShortcutProvider | None,
    tag: int,
    phase_cap: int | None = None,
) -> GrowResult:
    """Boruvka-style growing over the edges in ``mask``.

    Each component finds its minimum-key outgoing edge by part-wise
    aggregation.  Components flip shared coins and a tails component merges
    into the heads component its edge points to; the new id reaches the
    tails side by a second aggregation.
    """
    g, n = net.g, net.n
    ends = g.edges
    mnbrs: list[list[int]] = [[] for _ in range(n)]
    eid_of: list[dict[int, int]] = [dict() for _ in range(n)]
    for e in np.flatnonzero(mask).tolist():
        a, b = int(ends[e, 0]), int(ends[e, 1])
        mnbrs[a].append(b)
        mnbrs[b].append(a)
        eid_of[a][b] = e
        eid_of[b][a] = e
    comp = list(range(n))
    chosen: list[int] = []
    qualities: list[Quality] = []
    cap = phase_cap or 16 * (log2ceil(n) + 2)
    phase = 0
    while True:
        seen = _exchange(net, mnbrs, comp)
        cand: list[int | None] = [None] * n
        for v in range(n):
            opts = [int(keys[eid_of[v][u]]) for u in mnbrs[v] if seen[v][u] != comp[v]]
            cand[v] = min(opts) if opts else None
        ids = sorted(set(comp))
        index = {c: i for i, c in enumerate(ids)}
        groups: list[list[int]] = [[] for _ in ids]
        for v, c in enumerate(comp):
            groups[index[c]].append(v)
        parts = Partition(g, groups)
        sc = provider(g, parts) if provider is not None else Shortcut.empty(parts.k)
        qualities.append(measure_shortcut(g, parts, sc))
        links = part_links(g, parts.part_of, sc.edge_sets)
        moe = _aggregate(net, parts.part_of, links, cand, "min")
        if not net.barrier([moe.get(v) is not None for v in range(n)]):
            break
        if phase >= cap:
            raise NonTermination(f"component growing still has {len(ids)} components after {cap} phases")
        link: dict[int, tuple[int, int, int]] = {}
        for v in range(n):
            key = moe.get(v)
            if key is None:
                continue
            u = _key_other(g, key, v)
            if u is None or seen[v].get(u) is None:
                continue
            mine, theirs = comp[v], seen[v][u]
            if shared_coin(net.cfg.seed, tag, phase, mine) == 0 and shared_coin(net.cfg.seed, tag, phase, theirs) == 1:
                link[v] = (u, eid_of[v][u], theirs)
        net.execute(_Link(link), label="link", deadline=1 if link else 0)
        chosen.extend(e for _, e, _ in link.values())
        newid = _aggregate(net, parts.part_of, links, [link[v][2] if v in link else None for v in range(n)], "min")
        comp = [newid[v] if newid.get(v) is not None else comp[v] for v in range(n)]
        phase += 1
    return GrowResult(comp, sorted(chosen), phase, qualities)


def _edge_key(n: int, w: int, a: int, b: int) -> int:
    """Weight first, then the endpoints; endpoint order equals edge-id order."""
    return (w * n + a) * n + b


def _key_other(g: Graph, key: int, v: int) -> int | None:
    n = g.n
    b = key % n
    a = (key // n) % n
    if v == a:
        return b
    if v == b:
        return a
    return None


class _Link(NodeProgram):
    name = "link"

    def __init__(self, link):
        self.link = link

    def on_round(self, ctx, st, inbox):
        if st is None and ctx.id in self.link:
            u, _, _ = self.link[ctx.id]
            return True, [Send(u, "join", 1)], None
        return True, (), None


@dataclass
class MSTResult:
    edges: np.ndarray
    weight: int
    phases: int
    rounds: int
    qualities: list[Quality]
    outputs: dict[int, int]
    trace: Trace

    @property
    def quality(self) -> Quality:
        return max(self.qualities, key=lambda q: (q.Q, q.d))


def _global_links(g: Graph) -> tuple[np.ndarray, list]:
    part_of = np.zeros(g.n, np.int64)
    return part_of, part_links(g, part_of)


def boruvka_mst(
    g: Graph,
    cfg: SimConfig,
    weights,
    shortcut_provider: ShortcutProvider | None = None,
    *,
    net: Network | None = None,
) -> MSTResult:
    """Minimum spanning tree; ties are broken by edge id.

    ``shortcut_provider`` maps the current component partition to a
    shortcut (default: the empty shortcut).  All nodes end knowing the total
    weight, broadcast by a final global sum.
    """
    w = np.asarray(weights, np.int64)
    if w.shape != (g.m,):
        raise ValueError("need one weight per edge")
    if w.size and w.min() < 1:
        raise ValueError("weights must be positive")
    net = net or Network(g, cfg)
    start = net.round
    keys = np.asarray([_edge_key(g.n, int(x), int(a), int(b)) for x, (a, b) in zip(w, g.edges)], dtype=object)
    grown = _grow(net, np.ones(g.m, np.bool_), keys, shortcut_provider, tag=11)
    contrib = [0] * g.n
    for e in grown.chosen:
        contrib[int(g.edges[e, 0])] += int(w[e])
    part_of, links = _global_links(g)
    total = _aggregate(net, part_of, links, contrib, "sum")
    weight = int(total[0])
    qualities = grown.qualities + [Quality(0, net.D)]
    edges = np.asarray(grown.chosen, np.int64)
    return MSTResult(edges, weight, grown.phases, net.round - start, qualities, total, net.trace)


@dataclass
class VerifyResult:
    bit: int
    outputs: dict[int, int]
    phases: int
    rounds: int
    qualities: list[Quality]
    trace: Trace


def verify_spanning_connected(
    g: Graph,
    cfg: SimConfig,
    h_indicator,
    shortcut_provider: ShortcutProvider | None = None,
    *,
    net: Network | None = None,
) -> VerifyResult:
    """Every node outputs 1 iff the edges with indicator 1 span G connectedly."""
    mask = np.asarray(h_indicator).astype(np.bool_)
    if mask.shape != (g.m,):
        raise ValueError("need one indicator bit per edge")
    net = net or Network(g, cfg)
    start = net.round
    keys = np.asarray([_edge_key(g.n, 1, int(a), int(b)) for a, b in g.edges], dtype=object)
    grown = _grow(net, mask, keys, shortcut_provider, tag=12)
    part_of, links = _global_links(g)
    lo = _aggregate(net, part_of, links, grown.comp, "min")
    hi = _aggregate(net, part_of, links, grown.comp, "max")
    outputs = {v: int(lo[v] == hi[v]) for v in range(g.n)}
    return VerifyResult(outputs[0], outputs, grown.phases, net.round - start, grown.qualities, net.trace)


# ---------------------------------------------------------------- routing


class _Route(NodeProgram):
    name = "random-delay-route"

    def __init__(self, paths, delays, payloads, bits):
        self.next: dict[tuple[int, int], int] = {}
        self.starts: dict[int, list[tuple[int, int]]] = {}
        self.sink = {}
        self.payloads, self.bits = payloads, bits
        for i, (p, d) in enumerate(zip(paths, delays)):
            if p is None:
                continue
            self.sink[i] = p[-1]
            for a, b in zip(p, p[1:]):
                self.next[(i, a)] = b
            self.starts.setdefault(p[0], []).append((int(d), i))

    def init(self, ctx):
        return {"due": {}, "got": {}}

    def _send(self, v, i, out):
        out.append(Send(self.next[(i, v)], (i, self.payloads[i]), self.bits, (i, 0)))

    def on_round(self, ctx, st, inbox):
        v = ctx.id
        out: list[Send] = []
        if "t0" not in st:
            st["t0"] = ctx.round
            for d, i in sorted(self.starts.get(v, ())):
                if self.sink[i] == v:
                    st["got"][i] = 0
                elif d <= 1:
                    self._send(v, i, out)
                else:
                    st["due"].setdefault(ctx.round + d - 1, []).append(i)
                    ctx.wake(ctx.round + d - 1)
        for i in st["due"].pop(ctx.round, ()):
            self._send(v, i, out)
        for _, (i, _) in inbox:
            if self.sink[i] == v:
                st["got"][i] = ctx.round - st["t0"]
            else:
                self._send(v, i, out)
        return st, out, None

    def finish(self, ctx, st):
        return st["got"] or None


@dataclass
class RouteResult:
    deliveries: list[int | None]
    delays: list[int]
    q: int
    rounds: int
    trace: Trace

    @property
    def completion(self) -> int | None:
        if any(d is None for d in self.deliveries):
            return None
        return max(self.deliveries, default=0)

    @property
    def bound(self) -> int:
        return 8 * self.q * max(1, log2ceil(self.trace.n))


def random_delay_route(
    g: Graph,
    cfg: SimConfig,
    ps: PairShortcut,
    messages: Sequence[Any] | None = None,
    *,
    q: int | None = None,
    net: Network | None = None,
    packet_bits: int | None = None,
    window: int | None = None,
    tag: int = 0,
) -> RouteResult:
    """Send one packet along each path after a uniform delay in [q].

    Packets are ``packet_bits`` long (default one node id) and never split,
    so an edge forwards at most bandwidth/packet_bits of them per round; the
    rest wait FIFO, ties by pair id.  With ``window`` the attempt is cut
    off after that many rounds.
    """
    paths = [list(p) for p in ps.paths]
    if q is None:
        q = measure_pair_shortcut(g, PairSet((p[0], p[-1]) for p in paths), ps).Q if paths else 1
    q = max(1, int(q))
    net = net or Network(g, cfg)
    bits = packet_bits or net.word
    delays = shared_rng(cfg.seed, 3, tag).integers(1, q + 1, size=len(paths)).tolist()
    payloads = list(messages) if messages is not None else list(range(len(paths)))
    start = net.round
    out = net.execute(
        _Route(paths, delays, payloads, bits), label="route", deadline=window, truncate=window is not None
    )
    got: dict[int, int] = {}
    for d in out.values():
        if d:
            got.update(d)
    return RouteResult([got.get(i) for i in range(len(paths))], delays, q, net.round - start, net.trace)


# ---------------------------------------------------------------- pair-wise shortcut protocol


def oblivious_family(g: Graph) -> Callable[[int], RoutingScheme]:
    """h -> lowest-id BFS path for every pair; pairs farther than h hops fail."""
    scheme = RoutingScheme(g, {}, fallback=lambda a, b: bfs_path(g, a, b))
    return lambda h: scheme


@dataclass
class PairwiseResult:
    ps: PairShortcut
    h: int | None
    rounds: int
    attempts: list[dict]
    trace: Trace


def pairwise_shortcut_protocol(
    g: Graph,
    cfg: SimConfig,
    pairs: PairSet,
    scheme_family: Callable[[int], RoutingScheme] | None = None,
    *,
    net: Network | None = None,
) -> PairwiseResult:
    """Doubling search for a pair-wise shortcut that delivers one message per pair.

    For h = 2, 4, ... every node samples the same path per pair from the
    h-hop scheme (shared seed).  Pairs whose sample exceeds h hops fail
    outright; the rest try random-delay delivery with delays in [2h] for
    8 * 2h * ceil(log2 n) rounds.  Sinks that missed their message raise a
    failure bit, which a global barrier collects.  Past h = 2^ceil(log2 n)
    the BFS paths are returned.
    """
    if cfg.mode != "supported":
        raise ValueError("the pair-wise protocol needs supported mode")
    family = scheme_family or oblivious_family(g)
    net = net or Network(g, cfg)
    start = net.round
    L = max(1, log2ceil(g.n))
    pairs = PairSet(pairs)
    attempts = []
    h = 2
    top = 1 << L
    while h <= top:
        seed = int(np.random.SeedSequence([cfg.seed, 2, h]).generate_state(1)[0])
        sampled = sample_shortcuts(family(h), pairs, seed)
        ok = [len(p) - 1 <= h for p in sampled.paths]
        qh = 2 * h
        window = 8 * qh * L
        route = random_delay_route(
            g,
            cfg,
            PairShortcut([p for p, good in zip(sampled.paths, ok) if good]),
            q=qh,
            net=net,
            packet_bits=2 * net.word,
            window=window,
            tag=h,
        )
        it = iter(route.deliveries)
        delivered = [next(it) is not None if good else False for good in ok]
        failed = [False] * g.n
        for (_, t), d in zip(pairs, delivered):
            if not d:
                failed[t] = True
        any_failed = net.barrier(failed, label="failure-flood")
        # the failure flood costs O(D) even when D exceeds the current guess
        attempts.append(
            {"h": h, "q": qh, "window": window, "delivered": sum(delivered), "k": pairs.k, "flood_exceeds_q": net.D > qh}
        )
        if not any_failed:
            return PairwiseResult(sampled, h, net.round - start, attempts, net.trace)
        h *= 2
    fallback = PairShortcut([bfs_path(g, s, t) for s, t in pairs])
    return PairwiseResult(fallback, None, net.round - start, attempts, net.trace)


# ---------------------------------------------------------------- distributed part-wise construction


class _TreeMin(NodeProgram):
    """Minimum over each cluster tree: convergecast to the root, then broadcast."""

    name = "cluster-min"

    def __init__(self, parent, children, values, word):
        self.parent, self.children, self.values, self.word = parent, children, values, word

    def init(self, ctx):
        x = self.values[ctx.id]
        return {"wait": len(self.children[ctx.id]), "acc": -1 if x is None else x, "res": None}

    @staticmethod
    def _min(a, b):
        if a < 0:
            return b
        if b < 0:
            return a
        return min(a, b)

    def _bits(self, x):
        return 1 + (value_bits(x) if x >= 0 else 1)

    def _done(self, v, st, out):
        p = self.parent[v]
        if p >= 0:
            out.append(Send(p, ("up", st["acc"]), self._bits(st["acc"]), (), True))
        else:
            self._down(v, st, st["acc"], out)

    def _down(self, v, st, x, out):
        st["res"] = x
        out.extend(Send(c, ("down", x), self._bits(x), (), True) for c in self.children[v])

    def on_round(self, ctx, st, inbox):
        v = ctx.id
        out: list[Send] = []
        if ctx.first:
            if st["wait"] == 0:
                self._done(v, st, out)
            return st, out, None
        for _, (kind, x) in inbox:
            if kind == "up":
                st["wait"] -= 1
                st["acc"] = self._min(st["acc"], x)
                if st["wait"] == 0:
                    self._done(v, st, out)
            else:
                self._down(v, st, x, out)
        return st, out, None

    def finish(self, ctx, st):
        return st["res"]


class _Reorient(NodeProgram):
    """Attach tails clusters: reverse the root-to-attachment path and relabel.

    The attaching node b takes its heads neighbour as parent; the flip walks
    up b's old root path, each node adopting the sender as its new parent,
    while the new cluster id spreads to every other node of the cluster.
    """

    name = "cluster-merge"

    def __init__(self, parent, children, joins, word):
        self.parent, self.children, self.joins, self.word = parent, children, joins, word

    def init(self, ctx):
        return None

    def _spread(self, v, cid, skip, out):
        p = self.parent[v]
        if p >= 0 and p != skip:
            out.append(Send(p, ("flip", cid), 1 + self.word))
        out.extend(Send(c, ("id", cid), 1 + self.word) for c in self.children[v] if c != skip)

    def on_round(self, ctx, st, inbox):
        v = ctx.id
        out: list[Send] = []
        if ctx.first:
            if v in self.joins:
                a, cid = self.joins[v]
                out.append(Send(a, ("attach", 0), 1))
                self._spread(v, cid, -1, out)
                return (cid, a), out, None
            return st, out, None
        for u, (kind, cid) in inbox:
            if kind == "attach":
                continue
            if kind == "flip":
                self._spread(v, cid, u, out)
                st = (cid, u)
            else:
                self._spread_down(v, cid, out)
                st = (cid, self.parent[v])
        return st, out, None

    def _spread_down(self, v, cid, out):
        out.extend(Send(c, ("id", cid), 1 + self.word) for c in self.children[v])

    def finish(self, ctx, st):
        return st


class _SubtreeLabels(NodeProgram):
    """Subtree sizes, light child (largest subtree) and heavy depth per tree."""

    name = "tree-labels"

    def __init__(self, parent, children, word):
        self.parent, self.children, self.word = parent, children, word

    def init(self, ctx):
        return {"wait": len(self.children[ctx.id]), "size": 1, "kid": {}, "hd": None}

    def _up(self, v, st, out):
        kids = st["kid"]
        st["light"] = max(kids, key=lambda c: (kids[c], -c)) if kids else None
        p = self.parent[v]
        if p >= 0:
            out.append(Send(p, ("size", st["size"]), 1 + self.word))
        else:
            self._down(v, st, 0, out)

    def _down(self, v, st, hd, out):
        st["hd"] = hd
        for c in self.children[v]:
            step = 0 if c == st["light"] else 1
            out.append(Send(c, ("hd", hd + step), 1 + self.word))

    def on_round(self, ctx, st, inbox):
        v = ctx.id
        out: list[Send] = []
        if ctx.first:
            if st["wait"] == 0:
                self._up(v, st, out)
            return st, out, None
        for u, (kind, x) in inbox:
            if kind == "size":
                st["kid"][u] = x
                st["size"] += x
                st["wait"] -= 1
                if st["wait"] == 0:
                    self._up(v, st, out)
            else:
                self._down(v, st, x, out)
        return st, out, None

    def finish(self, ctx, st):
        return (st["size"], st["light"], st["hd"])


@dataclass
class ConstructionResult:
    shortcut: Shortcut
    quality: Quality
    phases: int
    merge_rates: list[float]
    rounds: int
    trees: list[dict[int, int | None]]
    labels: dict[int, tuple[int, int | None, int]]
    trace: Trace
    phase_stats: list[dict] = field(default_factory=list)

    @property
    def mean_merge_rate(self) -> float:
        return float(np.mean(self.merge_rates)) if self.merge_rates else 1.0


def _children(parent: Sequence[int]) -> list[list[int]]:
    kids: list[list[int]] = [[] for _ in parent]
    for v, p in enumerate(parent):
        if p >= 0:
            kids[p].append(v)
    return kids


def distributed_partwise_construction(
    g: Graph,
    cfg: SimConfig,
    parts: Partition,
    pairwise_proto: Callable[[PairSet], Any] | None = None,
    *,
    net: Network | None = None,
    phase_cap: int | None = None,
) -> ConstructionResult:
    """Grow rooted cluster trees inside every part, then lift pair shortcuts.

    Clusters start as single nodes.  Per phase each cluster flips a shared
    coin; every tails cluster with an edge to a heads cluster of the same
    part picks the lowest such edge, re-roots itself at that edge and joins.
    When no cluster has a neighbouring cluster left, the cluster trees span
    the parts; their heavy-light labels are computed in the network and the
    pair-wise protocol is called on the halving pairs of every light path.
    """
    if cfg.mode != "supported":
        raise ValueError("the construction needs supported mode")
    net = net or Network(g, cfg)
    start = net.round
    n, word = g.n, net.word
    part_of = parts.part_of
    intra = [[u for u in net.adj[v] if part_of[u] >= 0 and part_of[u] == part_of[v]] for v in range(n)]
    comp = list(range(n))
    parent = [-1] * n
    L = max(1, log2ceil(n))
    cap = phase_cap or 12 * L
    rates: list[float] = []
    stats: list[dict] = []
    phase = 0
    while True:
        seen = _exchange(net, intra, comp)
        touching = [any(seen[v][u] != comp[v] for u in intra[v]) for v in range(n)]
        if not any(intra) or not net.barrier(touching, label="cluster-check"):
            break
        live = len({comp[v] for v in range(n) if touching[v]})
        if phase >= cap:
            raise NonTermination(f"cluster merging hit the {cap}-phase cap with {len(set(comp))} clusters")
        heads = {}

        def is_heads(c):
            if c not in heads:
                heads[c] = shared_coin(cfg.seed, 13, phase, c) == 1
            return heads[c]

        cand: list[int | None] = [None] * n
        for v in range(n):
            if is_heads(comp[v]):
                continue
            opts = [g.edge_id(v, u) for u in intra[v] if seen[v][u] != comp[v] and is_heads(seen[v][u])]
            cand[v] = min(opts) if opts else None
        kids = _children(parent)
        mark = len(net.trace.records)
        best = net.execute(_TreeMin(parent, kids, cand, word))
        _sync(net, mark)
        joins = {}
        for v in range(n):
            e = best.get(v)
            if e is None or e < 0:
                continue
            a, b = (int(x) for x in g.edges[e])
            if v in (a, b):
                u = b if v == a else a
                if seen[v].get(u) is not None and seen[v][u] != comp[v]:
                    joins[v] = (u, seen[v][u])
        mark = len(net.trace.records)
        moved = net.execute(_Reorient(parent, kids, joins, word))
        _sync(net, mark)
        for v, st in moved.items():
            if st is not None:
                comp[v], parent[v] = st
        rates.append(len(joins) / live if live else 1.0)
        stats.append({"phase": phase, "clusters": len(set(comp)), "live": live, "merged": len(joins)})
        phase += 1
    for i, p in enumerate(parts.parts):
        if len({comp[v] for v in p}) != 1:
            raise ValidationError(f"part {i} ended split into several clusters")
    kids = _children(parent)
    mark = len(net.trace.records)
    labels = net.execute(_SubtreeLabels(parent, kids, word))
    _sync(net, mark)
    trees = [{v: (None if parent[v] < 0 else parent[v]) for v in p} for p in parts.parts]
    for tree in trees:
        hl = heavy_light(tree)
        for v in tree:
            if labels[v] != (hl.size[v], hl.light_child[v], hl.heavy_depth[v]):
                raise ValidationError(f"tree labels at node {v} disagree with the heavy-light decomposition")

    def default_proto(ps: PairSet):
        return pairwise_shortcut_protocol(g, cfg, ps, net=net)

    proto = pairwise_proto or default_proto

    def oracle(ps: PairSet) -> PairShortcut:
        res = proto(ps)
        return res.ps if hasattr(res, "ps") else res

    lift = lift_pairs_to_parts(g, parts, oracle, trees=trees)
    quality = measure_shortcut(g, parts, lift.shortcut)
    return ConstructionResult(
        lift.shortcut, quality, phase, rates, net.round - start, trees, labels, net.trace, stats
    )


# ---------------------------------------------------------------- diameter floor


def _first_difference(a: Trace, b: Trace, v: int) -> int | None:
    ra, rb = sorted(a.received_by(v)), sorted(b.received_by(v))
    for x, y in zip(ra, rb):
        if x != y:
            return min(x[0], y[0])
    if len(ra) != len(rb):
        return (ra if len(ra) > len(rb) else rb)[min(len(ra), len(rb))][0]
    return None


def _contracted_tree(g: Graph, group: Sequence[int]) -> list[int]:
    """Edge ids of a BFS spanning tree of G with the nodes of ``group`` merged."""
    inside = np.zeros(g.n, np.bool_)
    inside[list(group)] = True
    seen = inside.copy()
    frontier = sorted(group)
    tree = []
    while frontier:
        nxt = []
        for v in frontier:
            for u in g.neighbors(v).tolist():
                if not seen[u]:
                    seen[u] = True
                    tree.append(g.edge_id(v, u))
                    nxt.append(u)
        frontier = nxt
    return tree


@dataclass
class FloorRow:
    check: str
    D: int
    node: int
    first_round: int | None
    floor: int
    outputs: tuple
    ok: bool


def diameter_floor_checks(g: Graph, cfg: SimConfig, checks: Sequence[str] = ("connectivity", "mst")) -> list[FloorRow]:
    """Paired instances that only differ far from an observer node.

    ``connectivity``: H_1 = spanning tree of G/p plus the s-t path p, H_0
    the same without p's edge at s; observer t, floor D - 1.
    ``mst``: weights 1 on p except 2 on the edge entering its middle node v,
    n elsewhere, against the same weights on G plus a weight-1 edge (s, t);
    run in plain mode, observer v, floor D/2 - 1.
    """
    D = diameter(g)
    s = t = 0
    for a in range(g.n):
        dist = bfs_distances(g, [a])
        far = [b for b in range(g.n) if dist[b] == D]
        if far:
            s, t = a, far[0]
            break
    p = bfs_path(g, s, t)
    rows = []
    if "connectivity" in checks and len(p) >= 2:
        e = g.edge_id(p[0], p[1])
        h1 = np.zeros(g.m, np.bool_)
        h1[_contracted_tree(g, p)] = True
        for a, b in zip(p, p[1:]):
            h1[g.edge_id(a, b)] = True
        h0 = h1.copy()
        h0[e] = False
        r0 = verify_spanning_connected(g, cfg, h0)
        r1 = verify_spanning_connected(g, cfg, h1)
        first = _first_difference(r0.trace, r1.trace, t)
        outs = (r0.outputs[t], r1.outputs[t])
        ok = outs == (0, 1) and (first is None or first >= D - 1)
        rows.append(FloorRow("connectivity", D, t, first, D - 1, outs, ok))
    if "mst" in checks and D >= 3:
        mid = len(p) // 2
        v = p[mid]
        e = g.edge_id(p[mid - 1], v)
        w = np.full(g.m, g.n, np.int64)
        for a, b in zip(p, p[1:]):
            w[g.edge_id(a, b)] = 1
        w[e] = 2
        g2 = Graph(g.n, [tuple(x) for x in g.edges.tolist()] + [(min(s, t), max(s, t))])
        w2 = np.asarray([w[g.edge_id(a, b)] if g.has_edge(a, b) else 1 for a, b in g2.edges.tolist()], np.int64)
        plain = SimConfig(cfg.bandwidth_bits, "plain", cfg.seed, cfg.round_cap)
        r1 = boruvka_mst(g, plain, w, net=Network(g, plain, D=D))
        r2 = boruvka_mst(g2, plain, w2, net=Network(g2, plain, D=D))
        e2 = g2.edge_id(p[mid - 1], v)
        outs = (int(e in set(r1.edges.tolist())), int(e2 in set(r2.edges.tolist())))
        first = _first_difference(r1.trace, r2.trace, v)
        floor = D // 2 - 1
        ok = outs == (1, 0) and (first is None or first >= floor)
        rows.append(FloorRow("mst", D, v, first, floor, outs, ok))
    return rows
