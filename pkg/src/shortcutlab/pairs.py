"""Source-sink pair sets and the vertex-disjoint paths that certify them."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .graph import Graph, norm_edge


@dataclass(frozen=True)
class PairSet:
    pairs: tuple[tuple[int, int], ...]

    def __init__(self, pairs: Iterable[Sequence[int]]):
        object.__setattr__(self, "pairs", tuple((int(s), int(t)) for s, t in pairs))

    @property
    def k(self) -> int:
        return len(self.pairs)

    @property
    def sources(self) -> list[int]:
        return [s for s, _ in self.pairs]

    @property
    def sinks(self) -> list[int]:
        return [t for _, t in self.pairs]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


class PartPaths:
    """Simple, pairwise vertex-disjoint paths p_1..p_k in a host graph."""

    __slots__ = ("paths", "part_of", "n")

    def __init__(self, g: Graph, paths: Iterable[Sequence[int]], *, check: bool = True):
        self.paths = tuple(tuple(int(v) for v in p) for p in paths)
        self.n = g.n
        part_of = np.full(g.n, -1, np.int64)
        if check and not self.paths:
            raise ValidationError("need at least one path")
        for i, p in enumerate(self.paths):
            if check:
                if not p:
                    raise ValidationError(f"path {i} is empty")
                if len(set(p)) != len(p):
                    raise ValidationError(f"path {i} is not simple")
                if len(p) > 1:
                    try:
                        g.edge_ids(np.column_stack([p[:-1], p[1:]]))
                    except KeyError as exc:
                        raise ValidationError(f"path {i} uses a non-edge: {exc.args[0]}") from None
            idx = np.asarray(p, np.int64)
            if check and np.any(part_of[idx] >= 0):
                j = int(part_of[idx][part_of[idx] >= 0][0])
                raise ValidationError(f"paths {j} and {i} share a node")
            part_of[idx] = i
        self.part_of = part_of
        self.part_of.setflags(write=False)

    @property
    def k(self) -> int:
        return len(self.paths)

    @property
    def pairs(self) -> PairSet:
        return PairSet((p[0], p[-1]) for p in self.paths)

    def edges(self, i: int) -> list[tuple[int, int]]:
        p = self.paths[i]
        return [norm_edge(a, b) for a, b in zip(p, p[1:])]

    def nodes(self) -> np.ndarray:
        return np.flatnonzero(self.part_of >= 0)

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


def write_pairs(path: str | Path, pairs: PairSet, paths: Sequence[Sequence[int]] | None = None) -> None:
    """Lines ``s t`` or ``s t : v0 v1 ... vk`` when witness paths are given."""
    lines = []
    for i, (s, t) in enumerate(pairs):
        if paths is None:
            lines.append(f"{s} {t}")
        else:
            lines.append(f"{s} {t} : " + " ".join(map(str, paths[i])))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_pairs(path: str | Path) -> tuple[PairSet, list[list[int]] | None]:
    pairs, paths = [], []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, _, tail = line.partition(":")
        s, t = map(int, head.split())
        pairs.append((s, t))
        paths.append([int(x) for x in tail.split()] if tail.strip() else None)
    witness = paths if paths and all(p is not None for p in paths) else None
    return PairSet(pairs), witness
