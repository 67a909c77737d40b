"""Synchronous message-passing engine with per-edge bit budgets.

Round ``t`` consists of transmission followed by local computation: bits
queued before round ``t`` cross their edge (at most ``bandwidth_bits`` per
edge, direction and round), and every node that received a complete
message, or asked to be woken, runs ``on_round`` at the end of the round.
Step 0 of a phase runs every node once with an empty inbox.

A :class:`Network` keeps one global clock and one :class:`Trace` across
several phases, so multi-stage algorithms are charged for every round they
use, including the barriers that separate their stages.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..errors import BandwidthExceeded, LocalityViolation, NonTermination
from ..graph import Graph, bfs_tree, diameter, log2ceil

MODES = ("plain", "supported")


def default_bandwidth(n: int) -> int:
    return max(1, math.ceil(4 * math.log2(n))) if n > 1 else 1


def word_bits(n: int) -> int:
    """Bits needed for one node id."""
    return max(1, log2ceil(n))


def value_bits(x: int) -> int:
    return max(1, int(x).bit_length())


@dataclass(frozen=True)
class SimConfig:
    bandwidth_bits: int
    mode: str = "supported"
    seed: int = 0
    round_cap: int = 1_000_000

    def __post_init__(self):
        if self.bandwidth_bits < 1:
            raise ValueError("bandwidth must be at least one bit")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.round_cap < 1:
            raise ValueError("round_cap must be positive")

    @classmethod
    def for_graph(
        cls,
        g: Graph,
        *,
        seed: int = 0,
        mode: str = "supported",
        round_cap: int = 1_000_000,
        bandwidth_bits: int | None = None,
    ) -> "SimConfig":
        bw = default_bandwidth(g.n) if bandwidth_bits is None else bandwidth_bits
        return cls(bw, mode, seed, round_cap)


@dataclass(frozen=True)
class Send:
    """One outgoing message.  ``key`` orders messages queued in the same step;
    ``split`` lets a message longer than the bandwidth span several rounds."""

    to: int
    payload: Any
    bits: int
    key: tuple = ()
    split: bool = False


class NodeContext:
    """What a node may see.  ``graph`` is only available in supported mode;
    ``first`` is true during the opening step of a phase."""

    __slots__ = ("id", "neighbors", "n", "D", "input", "mode", "round", "first", "_g", "_seed", "_wake")

    def __init__(self, v, neighbors, n, D, inp, mode, g, seed, wake):
        self.id = v
        self.neighbors = neighbors
        self.n = n
        self.D = D
        self.input = inp
        self.mode = mode
        self.round = 0
        self.first = True
        self._g = g
        self._seed = seed
        self._wake = wake

    @property
    def graph(self) -> Graph:
        if self.mode != "supported":
            raise LocalityViolation(f"node {self.id} read the topology in plain mode")
        return self._g

    def rng(self, tag: int = 0) -> np.random.Generator:
        """Private coins of this node for the current round."""
        return np.random.default_rng([self._seed, 0, self.id, self.round, tag])

    def wake(self, at: int) -> None:
        if at <= self.round:
            raise ValueError("wake-up must lie in the future")
        self._wake(self.id, at)


def shared_rng(seed: int, *tag: int) -> np.random.Generator:
    """Shared coins: every node derives the same stream from the seed and a tag."""
    return np.random.default_rng([seed, 1, *tag])


def shared_coin(seed: int, *tag: int) -> int:
    return int(shared_rng(seed, *tag).integers(2))


class NodeProgram:
    """Per-node behaviour.  ``on_round`` returns ``(state, outbox, output)``;
    a non-None output halts the node.  ``finish`` gives the output of nodes
    still running when the phase falls quiet."""

    name = "program"

    def init(self, ctx: NodeContext) -> Any:
        return None

    def on_round(self, ctx: NodeContext, state: Any, inbox: list[tuple[int, Any]]):
        return state, (), None

    def finish(self, ctx: NodeContext, state: Any) -> Any:
        return None


def _digest(items) -> str:
    return hashlib.blake2b(repr(items).encode(), digest_size=8).hexdigest()


@dataclass
class Trace:
    n: int
    bandwidth: int
    records: list[tuple[int, int, int, int, str]] = field(default_factory=list)
    outputs: dict[int, Any] = field(default_factory=dict)
    halt_round: dict[int, int] = field(default_factory=dict)
    rounds: int = 0
    phases: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return sum(r[3] for r in self.records)

    def received_by(self, v: int) -> list[tuple[int, int, int, str]]:
        return [(t, u, b, h) for t, u, w, b, h in self.records if w == v]

    def prefix(self, rounds: int) -> "Trace":
        return Trace(
            self.n,
            self.bandwidth,
            [r for r in self.records if r[0] <= rounds],
            {},
            {},
            min(rounds, self.rounds),
            [p for p in self.phases if p[1] < rounds],
        )

    def to_jsonl(self) -> str:
        keys = ("round", "from", "to", "bits", "hash")
        return "".join(json.dumps(dict(zip(keys, r))) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())


class Network:
    """A graph, a config and a running clock shared by consecutive phases."""

    def __init__(self, g: Graph, cfg: SimConfig, D: int | None = None):
        self.g = g
        self.cfg = cfg
        self.n = g.n
        self.adj = g.adj
        self.D = diameter(g) if D is None else D
        self.bw = cfg.bandwidth_bits
        self.word = word_bits(g.n)
        self.round = 0
        self.trace = Trace(g.n, self.bw)
        self._tree: tuple[list[int], list[list[int]]] | None = None

    # ------------------------------------------------------------ engine

    def execute(
        self,
        program: NodeProgram,
        inputs: Sequence[Any] | Mapping[int, Any] | None = None,
        *,
        label: str | None = None,
        deadline: int | None = None,
        truncate: bool = False,
    ) -> dict[int, Any]:
        """Run one phase until no message is queued and no wake-up is pending.

        With ``deadline`` the phase occupies exactly that many rounds; traffic
        beyond it is an error unless ``truncate`` drops it.
        """
        n, bw, cap = self.n, self.bw, self.cfg.round_cap
        start = self.round
        trace = self.trace
        wakes: dict[int, set[int]] = {}

        def wake(v, at):
            wakes.setdefault(at, set()).add(v)

        get = (lambda v: inputs.get(v)) if isinstance(inputs, Mapping) else (lambda v: None if inputs is None else inputs[v])
        ctxs = [
            NodeContext(v, self.adj[v], n, self.D, get(v), self.cfg.mode, self.g, self.cfg.seed, wake) for v in range(n)
        ]
        for c in ctxs:
            c.round = start
        states = [program.init(c) for c in ctxs]
        halted = [False] * n
        outputs: dict[int, Any] = {}
        queues: dict[tuple[int, int], list] = {}
        seq = 0
        inbox: dict[int, list] = {}
        active: Iterable[int] = range(n)
        step = start
        last = start
        while True:
            for v in sorted(active):
                if halted[v]:
                    continue
                ctx = ctxs[v]
                ctx.round = step
                ctx.first = step == start
                state, out, res = program.on_round(ctx, states[v], inbox.get(v, []))
                states[v] = state
                for s in out:
                    if s.bits < 1:
                        raise ValueError("messages carry at least one bit")
                    if s.bits > bw and not s.split:
                        raise BandwidthExceeded(f"node {v} sent {s.bits} bits to {s.to} (bandwidth {bw})")
                    if s.to not in ctx.neighbors:
                        raise ValueError(f"node {v} sent to non-neighbour {s.to}")
                    q = queues.setdefault((v, s.to), [])
                    heapq.heappush(q, [step, s.key, seq, s.bits, s.bits, s.payload, s.split])
                    seq += 1
                if res is not None:
                    outputs[v] = res
                    halted[v] = True
                    trace.halt_round[v] = step
                    last = max(last, step)
            inbox = {}
            if not queues:
                future = [r for r in wakes if r > step]
                if not future:
                    break
                nxt = min(future)
            else:
                nxt = step + 1
            if nxt > cap:
                raise NonTermination(f"{program.name} still running at the {cap}-round cap")
            if deadline is not None and nxt - start > deadline:
                if truncate:
                    queues.clear()
                    break
                raise NonTermination(f"{program.name} overran its {deadline}-round schedule")
            step = nxt
            if queues:
                for (u, w) in sorted(queues):
                    q = queues[(u, w)]
                    budget, sent, done = bw, 0, []
                    while q and budget:
                        item = q[0]
                        if not item[6] and item[3] > budget:
                            break
                        take = min(item[3], budget)
                        item[3] -= take
                        budget -= take
                        sent += take
                        if item[3] == 0:
                            heapq.heappop(q)
                            done.append(item[5])
                            if not halted[w]:
                                inbox.setdefault(w, []).append((u, item[5]))
                        else:
                            done.append(("part", item[2], item[3]))
                    if sent:
                        trace.records.append((step, u, w, sent, _digest(done)))
                        last = step
                queues = {e: q for e, q in queues.items() if q}
            active = set(inbox) | wakes.pop(step, set())
        for v in range(n):
            if not halted[v]:
                ctxs[v].round = step
                res = program.finish(ctxs[v], states[v])
                if res is not None:
                    outputs[v] = res
        end = start + deadline if deadline is not None else last
        self.round = end
        trace.rounds = end
        trace.outputs.update(outputs)
        trace.phases.append((label or program.name, start, end))
        return outputs

    # ------------------------------------------------------------ services

    def global_tree(self) -> tuple[list[int], list[list[int]]]:
        """BFS tree rooted at node 0 as (parent, children).

        Supported mode computes it locally; plain mode builds it with a
        flood that all nodes schedule for D+1 rounds.
        """
        if self._tree is None:
            if self.cfg.mode == "supported":
                par = bfs_tree(self.g, range(self.n), 0)
                parent = [-1 if par[v] is None else par[v] for v in range(self.n)]
            else:
                out = self.execute(_TreeBuild(), label="bfs-tree", deadline=self.D + 1)
                parent = [out[v][0] for v in range(self.n)]
            children: list[list[int]] = [[] for _ in range(self.n)]
            for v, p in enumerate(parent):
                if p >= 0:
                    children[p].append(v)
            self._tree = (parent, children)
        return self._tree

    def barrier(self, flags: Sequence[bool] | None = None, label: str = "barrier") -> bool:
        """Convergecast and broadcast on the global tree; returns the OR of ``flags``."""
        parent, children = self.global_tree()
        out = self.execute(_Barrier(parent, children), flags, label=label)
        return bool(out.get(0, False)) if self.n > 1 else bool(flags and flags[0])


class _TreeBuild(NodeProgram):
    name = "bfs-tree"

    def init(self, ctx):
        return {"dist": 0 if ctx.id == 0 else None, "parent": -1}

    def on_round(self, ctx, st, inbox):
        out = []
        if ctx.first and ctx.id == 0:
            out = [Send(u, 0, word_bits(ctx.n)) for u in ctx.neighbors]
        elif st["dist"] is None and inbox:
            dists = [(d, u) for u, d in inbox if d != "child"]
            if dists:
                d, p = min(dists)
                st["dist"], st["parent"] = d + 1, p
                out = [Send(u, d + 1, word_bits(ctx.n)) for u in ctx.neighbors if u != p]
                out.append(Send(p, "child", 1))
        return st, out, None

    def finish(self, ctx, st):
        return (st["parent"], st["dist"])


class _Barrier(NodeProgram):
    name = "barrier"

    def __init__(self, parent, children):
        self.parent = parent
        self.children = children

    def init(self, ctx):
        return {"wait": len(self.children[ctx.id]), "flag": bool(ctx.input)}

    def on_round(self, ctx, st, inbox):
        v = ctx.id
        out = []
        for _, (kind, flag) in inbox:
            if kind == "go":
                return st, [Send(c, ("go", flag), 1) for c in self.children[v]], flag
            st["wait"] -= 1
            st["flag"] |= flag
        if st["wait"] == 0 and not st.get("sent"):
            st["sent"] = True
            if self.parent[v] < 0:
                return st, [Send(c, ("go", st["flag"]), 1) for c in self.children[v]], st["flag"]
            out.append(Send(self.parent[v], ("up", st["flag"]), 1))
        return st, out, None


def run(g: Graph, cfg: SimConfig, program: NodeProgram, inputs=None) -> Trace:
    """Run a single program to quiescence and return its trace."""
    net = Network(g, cfg)
    net.execute(program, inputs)
    return net.trace
