"""Command-line entry point.

Every subcommand turns its flags into a list of tasks (one per instance and
seed), runs them on ``--jobs`` worker threads and writes, into ``--out-dir``:

* ``<name>.csv``: one row per task in task order, fixed columns;
* ``<name>.json``: a summary with row and failure counts;
* ``<name>.walltime.csv``: wall-clock seconds per task, kept apart so the
  CSV bodies are byte-identical across runs with the same seed.

The exit code is 0 only if every row passed its validator.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

log = logging.getLogger("shortcutlab")

FIELDS = (
    "command",
    "instance",
    "seed",
    "n",
    "m",
    "k",
    "c",
    "d",
    "Q",
    "Q_lower",
    "Q_upper",
    "beta",
    "gamma",
    "rounds",
    "bits",
    "status",
    "detail",
)
PASSING = ("ok", "diameter regime")
ALGORITHMS = ("echo", "bfs", "aggregate", "mst", "connectivity", "route", "pairwise", "construct", "floor")


@dataclass(frozen=True)
class Task:
    command: str
    instance: str
    seed: int
    fn: Callable[[int], dict]


def _run_task(task: Task) -> tuple[dict, float]:
    t0 = time.perf_counter()
    try:
        row = task.fn(task.seed)
    except Exception as exc:  # a failing task becomes a failing row
        log.exception("task %s/%s failed", task.command, task.instance)
        row = {"status": "error", "detail": f"{type(exc).__name__}: {exc}"}
    row = {"command": task.command, "instance": task.instance, "seed": task.seed, **row}
    return row, time.perf_counter() - t0


def run_tasks(tasks: list[Task], jobs: int = 1) -> list[tuple[dict, float]]:
    if jobs <= 1:
        return [_run_task(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks))


def write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, FIELDS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in FIELDS})


def emit(out_dir: Path, name: str, results: list[tuple[dict, float]]) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [r for r, _ in results]
    write_csv(out_dir / f"{name}.csv", rows)
    with open(out_dir / f"{name}.walltime.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["command", "instance", "seed", "seconds"])
        for r, sec in results:
            w.writerow([r["command"], r["instance"], r["seed"], f"{sec:.4f}"])
    failures = [r for r in rows if r.get("status") not in PASSING]
    summary = {
        "command": name,
        "rows": len(rows),
        "passed": len(rows) - len(failures),
        "failed": len(failures),
        "first_failure": failures[0].get("detail") if failures else None,
    }
    (out_dir / f"{name}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if failures:
        print(f"{name}: {failures[0]['instance']} seed {failures[0]['seed']}: {failures[0].get('detail')}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- helpers


def _load_graph(path: str):
    from .graph import read_graph

    return read_graph(path)


def _seeds(args) -> list[int]:
    return [args.seed + i for i in range(max(1, args.repeat))]


def _status(ok: bool, detail: str = "") -> dict:
    return {"status": "ok" if ok else "fail", "detail": detail}


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> list[Task]:
    from .instances import InstanceSpec, gen, random_partition
    from .pairs import write_pairs
    from .shortcut import write_partition

    params = {
        k: v
        for k, v in {
            "n": args.n,
            "rows": args.rows,
            "cols": args.cols,
            "p": args.p,
            "k": args.k,
            "length": args.len,
            "leaves": args.leaves,
            "hubs": args.hubs,
        }.items()
        if v is not None
    }

    def fn(seed):
        inst = gen(InstanceSpec(args.family, params, seed))
        g = inst.graph
        Path(args.out).write_text(g.to_text())
        if args.pairs and inst.pairs is not None:
            write_pairs(args.pairs, inst.pairs, [list(p) for p in inst.paths] if inst.paths is not None else None)
        if args.parts:
            parts = inst.partition if inst.partition is not None else random_partition(g, args.num_parts, seed)
            write_partition(parts, args.parts)
        k = inst.pairs.k if inst.pairs is not None else None
        return {"n": g.n, "m": g.m, "k": k, **_status(True)}

    return [Task("gen", args.family, args.seed, fn)]


# ---------------------------------------------------------------- quality


def cmd_quality(args) -> list[Task]:
    from .pairs import read_pairs
    from .shortcut import measure_pair_shortcut, measure_shortcut, quality_interval, read_partition

    g, _ = _load_graph(args.graph)
    if args.parts:
        target = read_partition(g, args.parts)
    elif args.pairs:
        target = read_pairs(args.pairs)[0]
    else:
        raise SystemExit("quality needs --parts or --pairs")

    def fn(seed):
        qi = quality_interval(g, target, budget=args.quality_budget, seeds=(seed, seed + 1, seed + 2))
        if args.parts:
            q = measure_shortcut(g, target, qi.witness)
        else:
            q = measure_pair_shortcut(g, target, qi.witness)
        ok = qi.lower <= qi.upper and q.Q == qi.upper
        return {"n": g.n, "m": g.m, "k": target.k, "c": q.c, "d": q.d, "Q": q.Q, "Q_lower": qi.lower, "Q_upper": qi.upper, **_status(ok, "" if ok else "interval inverted")}

    return [Task("quality", Path(args.graph).name, s, fn) for s in _seeds(args)]


# ---------------------------------------------------------------- moving cuts


def cmd_mcut(args) -> list[Task]:
    from .movingcut import search, validate, write_cut
    from .pairs import read_pairs

    g, _ = _load_graph(args.graph)
    pairs = read_pairs(args.pairs)[0]
    out_dir = Path(args.out_dir)

    def fn(seed):
        res = search(g, pairs, args.mode, k=args.k, lmax=args.lmax)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_cut(res.cut, out_dir / f"cut_{args.mode}.txt")
        rep = validate(g, res.cut, pairs, res.k, res.beta)
        return {"n": g.n, "m": g.m, "k": pairs.k, "beta": res.beta, "gamma": res.capacity, **_status(rep.ok, rep.reason)}

    return [Task("mcut", Path(args.graph).name, args.seed, fn)]


# ---------------------------------------------------------------- gadgets


def cmd_gadget(args) -> list[Task]:
    from .gadgets import DiameterRegime, pipeline, validate_strict, write_gadget
    from .movingcut import read_cut
    from .pairs import PartPaths, read_pairs

    g, _ = _load_graph(args.graph)
    pairs, witness = read_pairs(args.pairs)
    out_dir = Path(args.out_dir)

    def fn(seed):
        paths = PartPaths(g, witness) if witness else None
        cut = read_cut(g, args.cut) if args.cut else None
        res = pipeline(g, pairs, paths, cut=cut, beta=args.beta)
        base = {"n": g.n, "m": g.m, "k": pairs.k}
        if isinstance(res, DiameterRegime):
            return {**base, "beta": res.beta, "d": res.d, "status": "diameter regime", "detail": res.reason}
        out_dir.mkdir(parents=True, exist_ok=True)
        write_gadget(g, res, out_dir / "gadget.json")
        rep = validate_strict(g, res)
        return {**base, "k": len(res.paths), "beta": res.beta, "gamma": res.capacity, **_status(rep.ok, rep.reason)}

    return [Task("gadget", Path(args.graph).name, args.seed, fn)]


# ---------------------------------------------------------------- simulations


def _sim_task(args, g, extra, seed) -> dict:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import minimum_spanning_tree

    from .graph import component_labels, bfs_path
    from .instances import random_partition
    from .pairs import read_pairs
    from .shortcut import PairShortcut, measure_pair_shortcut, read_partition
    from .sim import algorithms as A
    from .sim.core import Network, SimConfig

    cfg = SimConfig.for_graph(g, seed=seed, mode=args.mode)
    rng = np.random.default_rng(seed)
    base = {"n": g.n, "m": g.m}
    alg = args.alg
    if alg in ("echo", "bfs"):
        net = Network(g, cfg)
        out = net.execute(A.Echo() if alg == "echo" else A.BFSFlood(0))
        ok = len(out) == g.n
        trace = net.trace
        row = {**base, **_status(ok)}
    elif alg == "aggregate":
        parts = read_partition(g, args.parts) if args.parts else random_partition(g, max(1, g.n // 8), seed)
        vals = rng.integers(0, 1000, g.n).tolist()
        res = A.partwise_aggregate(g, cfg, parts, None, vals, args.op)
        f = {"min": min, "max": max, "sum": sum}[args.op]
        ok = all(res.outputs.get(v) == f(vals[u] for u in parts.parts[parts.part_of[v]]) for v in range(g.n))
        trace = res.trace
        row = {**base, "k": parts.k, "c": res.quality.c, "d": res.quality.d, "Q": res.quality.Q, **_status(ok)}
    elif alg == "mst":
        w = extra if extra is not None else rng.integers(1, g.n + 1, g.m)
        res = A.boruvka_mst(g, cfg, w)
        mat = coo_matrix((w.astype(float), (g.edges[:, 0], g.edges[:, 1])), shape=(g.n, g.n))
        ref = int(round(minimum_spanning_tree(mat).sum()))
        ok = res.weight == ref and all(x == ref for x in res.outputs.values())
        trace = res.trace
        q = res.quality
        row = {**base, "c": q.c, "d": q.d, "Q": q.Q, **_status(ok, "" if ok else f"weight {res.weight} != {ref}")}
    elif alg == "connectivity":
        h = rng.random(g.m) < 0.7
        res = A.verify_spanning_connected(g, cfg, h)
        ref = int(len(set(component_labels(g.n, g.edges[h]).tolist())) == 1)
        ok = all(x == ref for x in res.outputs.values())
        trace = res.trace
        row = {**base, **_status(ok)}
    elif alg in ("route", "pairwise"):
        pairs = read_pairs(args.pairs)[0]
        if alg == "route":
            ps = PairShortcut([bfs_path(g, s, t) for s, t in pairs])
            res = A.random_delay_route(g, cfg, ps)
            ok = res.completion is not None and res.completion <= res.bound
            trace = res.trace
            q = measure_pair_shortcut(g, pairs, ps)
        else:
            res = A.pairwise_shortcut_protocol(g, cfg, pairs)
            ok = True
            trace = res.trace
            q = measure_pair_shortcut(g, pairs, res.ps)
        row = {**base, "k": pairs.k, "c": q.c, "d": q.d, "Q": q.Q, **_status(ok)}
    elif alg == "construct":
        parts = read_partition(g, args.parts) if args.parts else random_partition(g, max(1, g.n // 25), seed)
        res = A.distributed_partwise_construction(g, cfg, parts)
        trace = res.trace
        q = res.quality
        row = {**base, "k": parts.k, "c": q.c, "d": q.d, "Q": q.Q, **_status(True, f"phases={res.phases} merge_rate={res.mean_merge_rate:.4f}")}
    elif alg == "floor":
        rows = A.diameter_floor_checks(g, cfg)
        ok = all(r.ok for r in rows)
        detail = "; ".join(f"{r.check}: first={r.first_round} floor={r.floor}" for r in rows)
        return {**base, "d": rows[0].D if rows else None, "rounds": min((r.first_round or 0) for r in rows) if rows else 0, **_status(ok, detail)}
    else:
        raise ValueError(f"unknown algorithm {alg!r}")
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        trace.write(Path(args.out_dir) / f"trace_{alg}_{seed}.jsonl")
    return {**row, "rounds": trace.rounds, "bits": trace.total_bits}


def cmd_sim(args) -> list[Task]:
    g, extra = _load_graph(args.graph)
    return [Task(f"sim-{args.alg}", Path(args.graph).name, s, lambda seed: _sim_task(args, g, extra, seed)) for s in _seeds(args)]


# ---------------------------------------------------------------- report and plans


def cmd_report(args) -> list[tuple[dict, float]]:
    rows = []
    files: list[Path] = []
    for item in args.inputs:
        p = Path(item)
        files.extend(sorted(p.rglob("*.csv")) if p.is_dir() else [p])
    for f in files:
        if f.name.endswith(".walltime.csv") or f.name == "report.csv":
            continue
        with open(f, newline="") as fh:
            rd = csv.DictReader(fh)
            if rd.fieldnames is None or tuple(rd.fieldnames) != FIELDS:
                continue
            rows.extend(rd)
    rows.sort(key=lambda r: (r["command"], r["instance"], int(r["seed"] or 0)))
    return [(r, 0.0) for r in rows]


def cmd_plan(args) -> int:
    """Run a JSON list of command lines, each into its own sub-directory.

    ``{out}`` in a step expands to the plan's output directory, so steps can
    hand generated files to later steps.
    """
    plan = json.loads(Path(args.plan).read_text())
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    code = 0
    for i, step in enumerate(plan):
        argv = shlex.split(step) if isinstance(step, str) else list(step)
        argv = [a.replace("{out}", str(out)) for a in argv]
        sub = out / f"{i:02d}-{argv[0]}"
        argv += ["--out-dir", str(sub), "--jobs", str(args.jobs)]
        if "--seed" not in argv and argv[0] != "report":
            argv += ["--seed", str(args.seed)]
        code = max(code, main(argv))
    return code


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shortcutlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, graph=True):
        if graph:
            p.add_argument("--graph", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--repeat", type=int, default=1, help="run seeds seed..seed+repeat-1")
        p.add_argument("--out-dir", default=".")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("gen", help="generate an instance")
    common(p, graph=False)
    p.add_argument("--family", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--len", type=int)
    p.add_argument("--leaves", type=int)
    p.add_argument("--hubs")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs")
    p.add_argument("--parts")
    p.add_argument("--num-parts", type=int, default=8)

    p = sub.add_parser("quality", help="bracket the best shortcut quality")
    common(p)
    p.add_argument("--pairs")
    p.add_argument("--parts")
    p.add_argument("--quality-budget", type=int, default=2000)

    p = sub.add_parser("mcut", help="moving-cut search")
    msub = p.add_subparsers(dest="action", required=True)
    p = msub.add_parser("search")
    common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--mode", choices=("lp", "exact"), default="lp")
    p.add_argument("--lmax", type=int, default=4)
    p.add_argument("--k", type=int)

    p = sub.add_parser("gadget", help="build and validate a disjointness gadget")
    common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--cut")
    p.add_argument("--beta", type=int)

    p = sub.add_parser("sim", help="run a distributed algorithm in the simulator")
    ssub = p.add_subparsers(dest="action", required=True)
    p = ssub.add_parser("run")
    common(p)
    p.add_argument("--alg", choices=ALGORITHMS, required=True)
    p.add_argument("--mode", choices=("plain", "supported"), default="supported")
    p.add_argument("--parts")
    p.add_argument("--pairs")
    p.add_argument("--op", choices=("min", "max", "sum"), default="min")

    p = sub.add_parser("report", help="merge result CSVs")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("plan", help="run a JSON plan of subcommands")
    p.add_argument("--plan", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SHORTCUTLAB_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.cmd == "plan":
        return cmd_plan(args)
    out_dir = Path(args.out_dir)
    if args.cmd == "report":
        return emit(out_dir, "report", cmd_report(args))
    makers = {"gen": cmd_gen, "quality": cmd_quality, "mcut": cmd_mcut, "gadget": cmd_gadget, "sim": cmd_sim}
    tasks = makers[args.cmd](args)
    name = args.cmd if args.cmd not in ("mcut", "sim") else f"{args.cmd}-{args.action}"
    return emit(out_dir, name, run_tasks(tasks, args.jobs))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
