"""Command-line interface: ``gen``, ``schedule``, ``align`` and ``bench``.

Exit codes: 0 on success, 2 on invalid input, 3 when no rank schedule fits.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import tracemalloc
from dataclasses import asdict, dataclass

import numpy as np

from .baselines import minibatch_ot, minibatch_plan_stats
from .core import KernelCost
from .datagen import FAMILIES, SyntheticSpec, Transform, generate
from .entropic import DEFAULT_EPSILON, EntropicPlan, EntropicProblem, entropic_cost, plan_stats, sinkhorn
from .errors import HirefError, Infeasible, UsageError, ValidationError
from .exact import hungarian
from .io import read_points, write_points
from .refine import RefineParams, hierarchical_refine
from .schedule import ScheduleQuery, optimal_schedule

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3

BENCH_FIELDS = ("method", "n", "cost_tag", "cost", "entropy_shannon", "entropy_eq4",
                "nonzeros", "ms", "seed")
EXACT_LIMIT = 2048
SINKHORN_LIMIT = 1 << 14


@dataclass
class BenchResult:
    method: str
    n: int
    cost_tag: str
    cost: float
    entropy_shannon: float
    entropy_eq4: float
    nonzeros: int
    ms: float
    seed: int
    peak_bytes: int = 0

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in BENCH_FIELDS}


def _threads(value):
    if value is not None:
        return value
    env = os.environ.get("OT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"OT_THREADS must be an integer, got {env!r}") from None
    return 1


def _trim(x: np.ndarray, y: np.ndarray, n_keep: int, seed: int):
    """Drop points uniformly at random from both clouds; returns kept indices."""
    n = len(x)
    if n_keep == n:
        idx = np.arange(n)
        return idx, idx
    rng = np.random.default_rng([seed, n, n_keep])
    keep_x = np.sort(rng.choice(n, size=n_keep, replace=False))
    keep_y = np.sort(rng.choice(n, size=n_keep, replace=False))
    return keep_x, keep_y


def run_hiref(x, y, cost_tag, depth, max_rank, max_base, seed, trim=True, threads=1,
              instrument=True):
    """Schedule, optional trim and refinement in one call.

    Returns ``(bijection, keep_x, keep_y, schedule, report)``; the
    bijection indexes the kept points.
    """
    n = len(x)
    schedule = optimal_schedule(ScheduleQuery(n, depth, max_rank, max_base, trim))
    keep_x, keep_y = _trim(x, y, schedule.n, seed)
    xs, ys = x[keep_x], y[keep_y]
    params = RefineParams(threads=threads, instrument=instrument)
    bij, report = hierarchical_refine(xs, ys, KernelCost(xs, ys, cost_tag), schedule, params, seed)
    return bij, keep_x, keep_y, schedule, report


def cmd_gen(args) -> int:
    transform = None
    if args.angle or args.scale != 1.0 or args.shift_x or args.shift_y:
        transform = Transform(args.angle, args.scale, (args.shift_x, args.shift_y))
    src, tgt = generate(SyntheticSpec(args.dataset, args.n, args.seed, transform))
    write_points(args.out_source, src)
    write_points(args.out_target, tgt)
    return EXIT_OK


def cmd_schedule(args) -> int:
    sched = optimal_schedule(ScheduleQuery(args.n, args.depth, args.max_rank, args.max_base,
                                           args.trim))
    json.dump(sched.to_dict(), sys.stdout)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_align(args) -> int:
    src = read_points(args.source)
    tgt = read_points(args.target)
    if src.n != tgt.n:
        raise ValidationError(f"source has {src.n} points, target has {tgt.n}")
    if src.d != tgt.d:
        raise ValidationError(f"source has dimension {src.d}, target has {tgt.d}")
    bij, keep_x, keep_y, schedule, report = run_hiref(
        src.points, tgt.points, args.cost, args.depth, args.max_rank, args.max_base,
        args.seed, args.trim, _threads(args.threads))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source_index", "target_index"])
        for i, j in zip(keep_x, keep_y[bij.perm]):
            writer.writerow([int(i), int(j)])
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_jsonable(report.to_dict()), fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def parse_methods(text: str) -> list:
    methods = []
    for item in text.split(","):
        item = item.strip()
        if item in ("hiref", "sinkhorn", "exact"):
            methods.append((item, None))
        elif item.startswith("minibatch:"):
            try:
                b = int(item.split(":", 1)[1])
            except ValueError:
                raise UsageError(f"bad batch size in {item!r}") from None
            methods.append(("minibatch", b))
        else:
            raise UsageError(f"unknown method {item!r}; use hiref, sinkhorn, exact or minibatch:B")
    return methods


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def bench_one(method, batch, x, y, cost_tag, seed, args, threads=1):
    """One benchmark row, or ``None`` when the method is skipped at this size."""
    n = len(x)
    if method == "exact" and n > EXACT_LIMIT:
        return None
    if method == "sinkhorn" and n > args.sinkhorn_limit:
        return None
    if method == "minibatch" and batch > n:
        return None
    cost = KernelCost(x, y, cost_tag)
    tracemalloc.start()
    tic = time.perf_counter()
    if method == "hiref":
        bij, *_ = run_hiref(x, y, cost_tag, args.depth, args.max_rank, args.max_base, seed,
                            True, threads, instrument=False)
        ms = (time.perf_counter() - tic) * 1e3
        value = bij.cost
        stats = plan_stats(bij)
        n = len(bij.perm)
    elif method == "exact":
        res = hungarian(cost.dense())
        ms = (time.perf_counter() - tic) * 1e3
        value = res.cost
        stats = plan_stats(res)
    elif method == "sinkhorn":
        problem = EntropicProblem(cost, epsilon=args.epsilon, schedule="auto")
        pot = sinkhorn(problem).potentials
        ms = (time.perf_counter() - tic) * 1e3
        value = entropic_cost(problem, pot)
        stats = plan_stats(EntropicPlan(problem, pot))
    else:
        plan, value = minibatch_ot(x, y, cost, batch, epsilon=args.epsilon, seed=seed,
                                   threads=threads)
        ms = (time.perf_counter() - tic) * 1e3
        stats = minibatch_plan_stats(plan)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    name = method if batch is None else f"minibatch:{batch}"
    return BenchResult(name, n, cost_tag, float(value), float(stats.entropy_shannon),
                       float(stats.entropy), int(stats.nonzeros), round(ms, 3), seed, peak)


def cmd_bench(args) -> int:
    if args.suite != "synthetic":
        raise UsageError(f"unknown suite {args.suite!r}")
    methods = parse_methods(args.methods)
    sizes = _int_list(args.sizes)
    seeds = _int_list(args.seeds)
    costs = [c.strip() for c in args.costs.split(",") if c.strip()]
    for c in costs:
        if c not in ("euclidean", "sqeuclidean"):
            raise UsageError(f"unknown cost {c!r}")
    threads = _threads(args.threads)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
        writer.writeheader()
        for n in sizes:
            for seed in seeds:
                src, tgt = generate(SyntheticSpec(args.dataset, n, seed))
                for method, batch in methods:
                    for cost_tag in costs:
                        res = bench_one(method, batch, src.points, tgt.points, cost_tag, seed,
                                        args, threads)
                        if res is not None:
                            writer.writerow(res.row())
                            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _schedule_flags(p, depth=2, max_rank=16, max_base=1024):
    p.add_argument("--depth", type=int, default=depth, help="maximum number of ranks")
    p.add_argument("--max-rank", type=int, default=max_rank, help="cap on every rank")
    p.add_argument("--max-base", type=int, default=max_base, help="cap on the leaf size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiref", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic source/target pair")
    p.add_argument("--dataset", required=True, choices=FAMILIES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-source", required=True)
    p.add_argument("--out-target", required=True)
    p.add_argument("--angle", type=float, default=0.0, help="rotation in radians")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--shift-x", type=float, default=0.0)
    p.add_argument("--shift-y", type=float, default=0.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("schedule", help="print the optimal rank schedule as JSON")
    p.add_argument("--n", type=int, required=True)
    _schedule_flags(p)
    p.add_argument("--trim", action="store_true", help="drop points if n has no schedule")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("align", help="compute a bijective map between two point files")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--cost", choices=("euclidean", "sqeuclidean"), default="sqeuclidean")
    _schedule_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="defaults to $OT_THREADS or 1")
    p.add_argument("--out", required=True, help="pairs CSV")
    p.add_argument("--metrics", default=None, help="metrics JSON")
    p.add_argument("--trim", action="store_true")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("bench", help="benchmark methods on synthetic data, CSV output")
    p.add_argument("--suite", default="synthetic")
    p.add_argument("--dataset", choices=FAMILIES, default="checkerboard")
    p.add_argument("--methods", default="hiref,sinkhorn,exact")
    p.add_argument("--sizes", default="512")
    p.add_argument("--seeds", default="0")
    p.add_argument("--costs", default="sqeuclidean")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--sinkhorn-limit", type=int, default=SINKHORN_LIMIT)
    _schedule_flags(p)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"hiref: infeasible ({exc.constraint}): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, OSError) as exc:
        print(f"hiref: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except HirefError as exc:
        print(f"hiref: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
