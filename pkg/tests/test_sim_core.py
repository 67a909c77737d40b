import pytest

from shortcutlab import BandwidthExceeded, Graph, NonTermination
from shortcutlab.errors import LocalityViolation
from shortcutlab.graph import diameter
from shortcutlab.instances import cycle, grid, path_graph, random_graph
from shortcutlab.sim import Network, NodeProgram, Send, SimConfig, run
from shortcutlab.sim.algorithms import BFSFlood, Echo
from shortcutlab.sim.core import default_bandwidth, shared_coin, word_bits


def test_config_defaults():
    g = grid(16)
    cfg = SimConfig.for_graph(g)
    assert cfg.bandwidth_bits == default_bandwidth(256) == 32
    assert word_bits(256) == 8
    with pytest.raises(ValueError):
        SimConfig(0)
    with pytest.raises(ValueError):
        SimConfig(8, mode="async")


def test_echo_on_k2_takes_one_round():
    g = Graph(2, [(0, 1)])
    tr = run(g, SimConfig.for_graph(g), Echo())
    assert tr.rounds == 1
    assert tr.outputs == {0: (1,), 1: (0,)}


@pytest.mark.parametrize("g", [path_graph(11), cycle(12), grid(5, 7)], ids=["path", "cycle", "grid"])
def test_bfs_flood_halts_after_d_plus_one_rounds(g):
    tr = run(g, SimConfig.for_graph(g), BFSFlood(0))
    assert tr.rounds == diameter(g) + 1
    from shortcutlab.graph import bfs_distances

    assert [tr.outputs[v] for v in range(g.n)] == bfs_distances(g, [0]).tolist()


def test_bfs_flood_from_path_end():
    g = path_graph(11)
    assert run(g, SimConfig.for_graph(g), BFSFlood(0)).rounds == 11


def test_replay_is_bit_identical():
    g = random_graph(30, 0.15, 4)
    cfg = SimConfig.for_graph(g, seed=9)
    a = run(g, cfg, BFSFlood(3))
    b = run(g, cfg, BFSFlood(3))
    assert a.to_jsonl() == b.to_jsonl()


class _Big(NodeProgram):
    def __init__(self, bits, split=False):
        self.bits = bits
        self.split = split

    def on_round(self, ctx, st, inbox):
        if ctx.first and ctx.id == 0:
            return st, [Send(1, "x", self.bits, split=self.split)], None
        if inbox:
            return st, (), ctx.round
        return st, (), None


def test_bandwidth_is_enforced_and_split_spans_rounds():
    g = Graph(2, [(0, 1)])
    cfg = SimConfig(8)
    with pytest.raises(BandwidthExceeded):
        run(g, cfg, _Big(9))
    tr = run(g, cfg, _Big(20, split=True))
    assert tr.outputs[1] == 3
    assert [r[3] for r in tr.records] == [8, 8, 4]


class _Queue(NodeProgram):
    def on_round(self, ctx, st, inbox):
        if ctx.first and ctx.id == 0:
            return [], [Send(1, i, 6, key=(i,)) for i in range(3)], None
        if ctx.id == 1:
            st = (st or []) + [(ctx.round, x) for _, x in inbox]
            return st, (), None
        return st, (), None

    def finish(self, ctx, st):
        return st


def test_fifo_queue_waits_for_room():
    g = Graph(2, [(0, 1)])
    tr = run(g, SimConfig(8), _Queue())
    assert tr.outputs[1] == [(1, 0), (2, 1), (3, 2)]


class _Peek(NodeProgram):
    def on_round(self, ctx, st, inbox):
        return st, (), ctx.graph.m


def test_topology_only_in_supported_mode():
    g = path_graph(3)
    assert run(g, SimConfig.for_graph(g), _Peek()).outputs[0] == 2
    with pytest.raises(LocalityViolation):
        run(g, SimConfig.for_graph(g, mode="plain"), _Peek())


class _Chatter(NodeProgram):
    def on_round(self, ctx, st, inbox):
        return st, [Send(u, 0, 1) for u in ctx.neighbors], None


def test_round_cap_and_deadline():
    g = path_graph(3)
    with pytest.raises(NonTermination):
        run(g, SimConfig(4, round_cap=50), _Chatter())
    net = Network(g, SimConfig(4))
    with pytest.raises(NonTermination, match="schedule"):
        net.execute(_Chatter(), deadline=5)
    net = Network(g, SimConfig(4))
    net.execute(_Chatter(), deadline=5, truncate=True)
    assert net.round == 5


def test_barrier_ors_flags_in_both_modes():
    g = grid(4)
    for mode in ("supported", "plain"):
        net = Network(g, SimConfig.for_graph(g, mode=mode))
        net.execute(BFSFlood(5))
        assert net.barrier([v == 15 for v in range(g.n)]) is True
        assert net.barrier([False] * g.n) is False
        parent, _ = net.global_tree()
        assert parent[0] == -1 and all(p >= 0 for p in parent[1:])


def test_shared_coins_are_common():
    assert shared_coin(5, 1, 2) == shared_coin(5, 1, 2)
    assert len({shared_coin(5, t) for t in range(40)}) == 2


def test_trace_prefix_and_receive():
    g = path_graph(6)
    tr = run(g, SimConfig.for_graph(g), BFSFlood(0))
    p = tr.prefix(3)
    assert p.rounds == 3 and all(r[0] <= 3 for r in p.records)
    assert {u for _, u, _, _ in tr.received_by(2)} == {1, 3}
