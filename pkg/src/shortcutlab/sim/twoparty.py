"""Disjointness instances on strict gadgets and two-party replay of traces."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import HypothesisViolated
from ..gadgets import DisjointnessGadget, walk_edge_ids
from ..graph import Graph, component_labels, ell_distances
from ..movingcut import MovingCut, distance
from ..pairs import PairSet
from .core import Trace


@dataclass(frozen=True)
class DisjointnessLayers:
    """H_1 and H_2 as one fixed mask, plus the gated endpoint edges of every path."""

    fixed: np.ndarray
    first: np.ndarray
    last: np.ndarray

    def instance(self, x: Sequence[int], y: Sequence[int]) -> np.ndarray:
        x = np.asarray(x, np.int64)
        y = np.asarray(y, np.int64)
        if x.shape != self.first.shape or y.shape != self.last.shape:
            raise ValueError(f"need {len(self.first)} bits for each player")
        h = self.fixed.copy()
        h[self.first[x == 0]] = True
        h[self.last[y == 0]] = True
        return h


def contracted_spanning_tree(g: Graph, contracted: np.ndarray) -> np.ndarray:
    """Edge ids of a BFS spanning tree of G / ``contracted`` (an edge mask).

    The super node that holds the lowest id is the root; a super node is
    expanded by scanning its members in id order and their neighbours in id
    order, keeping the first edge that reaches each unseen super node.
    """
    comp = component_labels(g.n, g.edges[contracted])
    members: dict[int, list[int]] = {}
    for v in range(g.n):
        members.setdefault(int(comp[v]), []).append(v)
    seen = {int(comp[0])}
    q = deque([int(comp[0])])
    tree = []
    while q:
        c = q.popleft()
        for v in members[c]:
            for u, e in zip(g.neighbors(v).tolist(), g.eid[g.indptr[v] : g.indptr[v + 1]].tolist()):
                cu = int(comp[u])
                if cu not in seen:
                    seen.add(cu)
                    tree.append(e)
                    q.append(cu)
    return np.asarray(sorted(tree), np.int64)


def disjointness_layers(g: Graph, gadget: DisjointnessGadget) -> DisjointnessLayers:
    walks = [walk_edge_ids(g, p) for p in gadget.paths]
    if any(len(w) < 3 for w in walks):
        raise ValueError("paths need at least three edges")
    core = np.zeros(g.m, np.bool_)
    core[gadget.tree] = True
    for w in walks:
        core[w] = True
    fixed = np.zeros(g.m, np.bool_)
    fixed[contracted_spanning_tree(g, core)] = True
    fixed[gadget.tree] = True
    for w in walks:
        fixed[w[1:-1]] = True
    first = np.asarray([w[0] for w in walks], np.int64)
    last = np.asarray([w[-1] for w in walks], np.int64)
    return DisjointnessLayers(fixed, first, last)


def build_disjointness_instance(g: Graph, gadget: DisjointnessGadget, x: Sequence[int], y: Sequence[int]) -> np.ndarray:
    """Edge indicator of H = H_1 + H_2 + H_3; H spans G connectedly iff x and y are disjoint.

    H_1 is a spanning tree of G with T and all path edges contracted, H_2 is T
    plus the inner edges of every path, and H_3 holds the first edge of p_i
    iff x_i = 0 and the last edge iff y_i = 0.
    """
    return disjointness_layers(g, gadget).instance(x, y)


@dataclass
class TwoPartyReplay:
    alice_bits: int
    bob_bits: int
    transcript: list[tuple[int, str, int, int, int]]
    active_rounds: dict[tuple[int, str], int]
    rounds: int
    gamma: int
    bandwidth: int
    levels: np.ndarray = field(repr=False)

    @property
    def total_bits(self) -> int:
        return self.alice_bits + self.bob_bits

    @property
    def bound(self) -> int:
        return 2 * self.bandwidth * self.gamma


def extract_two_party_protocol(
    trace: Trace,
    g: Graph,
    mc: MovingCut,
    s: PairSet,
    *,
    rounds: int | None = None,
) -> TwoPartyReplay:
    """Replay a T-round trace as a protocol between Alice and Bob.

    With d_v the l-distance from the sources, Alice simulates the nodes with
    d_v < 2T - t after round t and Bob those with d_v > t.  A message w -> v
    of round t must be forwarded from Alice to Bob when d_v > t and
    d_w <= t - 1, and from Bob to Alice when d_v < 2T - t and
    d_w >= 2T - t + 1.  ``rounds`` replays only a prefix of the trace.
    Per edge and direction the number of forwarding rounds is at most
    l_e - 1, so the total is at most 2 * bandwidth * capacity; both are
    checked and a violation raises AssertionError.
    """
    T = trace.rounds if rounds is None else int(rounds)
    reach = distance(g, mc, s)
    if 2 * T > reach:
        raise HypothesisViolated(f"2T = {2 * T} exceeds the cut distance {reach}")
    d = ell_distances(g, mc.lengths, sorted(set(s.sources)))
    alice = bob = 0
    transcript = []
    active: dict[tuple[int, str], set[int]] = {}
    for t, w, v, bits, _ in trace.records:
        if t > T:
            continue
        if d[v] > t and d[w] <= t - 1:
            side = "A>B"
            alice += bits
        elif d[v] < 2 * T - t and d[w] >= 2 * T - t + 1:
            side = "B>A"
            bob += bits
        else:
            continue
        e = g.edge_id(w, v)
        active.setdefault((e, side), set()).add(t)
        transcript.append((t, side, w, v, bits))
    counts = {k: len(r) for k, r in active.items()}
    for (e, side), c in counts.items():
        if c > mc.lengths[e] - 1:
            raise AssertionError(f"edge {e} active {c} rounds ({side}) with length {mc.lengths[e]}")
    total = alice + bob
    if total > 2 * trace.bandwidth * mc.capacity:
        raise AssertionError(f"{total} cross bits exceed 2 * {trace.bandwidth} * {mc.capacity}")
    return TwoPartyReplay(alice, bob, transcript, counts, T, mc.capacity, trace.bandwidth, d)
