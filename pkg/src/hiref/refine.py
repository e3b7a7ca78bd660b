"""Hierarchical refinement: recursive balanced co-partitioning to a bijection.

Level ``t`` holds ``rho_t`` co-clusters, pairs ``(X_q, Y_q)`` of equal size.
Each pair is split ``r_{t+1}`` ways by a low-rank OT solve on its restricted
cost, both factors are rounded to the same balanced capacities, and cluster
``z`` of the source block is paired with cluster ``z`` of the target block.
Blocks of the leaf size are matched exactly.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial.distance import pdist

from .core import (
    CostOracle,
    DenseCost,
    FactoredCost,
    KernelCost,
    as_points,
    factor_metric_sampled,
    factor_sqeuclidean,
    restrict_cost,
)
from .errors import ScheduleError, SizeError
from .exact import brute_force_lrot, hungarian
from .lrot import LrotParams, balanced_capacities, harden, solve_lrot
from .schedule import RankSchedule

log = logging.getLogger(__name__)

# kernel blocks with more pairs than this get a Monte Carlo scale cost
EXACT_PAIR_LIMIT = 1 << 24
_SCALE_SAMPLES = 1 << 20


class CoClustering(NamedTuple):
    """Paired source/target index blocks at one level."""

    level: int
    pairs: list
    rho: int


class Bijection(NamedTuple):
    perm: np.ndarray
    cost: float


class LevelStats(NamedTuple):
    level: int
    rho: int
    scale_cost: float
    delta: float | None
    mean_diam: float
    ms: float
    sizes: tuple


@dataclass
class RefineReport:
    """Per-level instrumentation of one run.

    ``levels[t]`` describes the co-clustering at level ``t``; the last entry
    is the final bijection (``rho = n``).  ``delta`` is the drop in scale cost
    to the next entry.  ``grad_bound`` is the cost's Lipschitz constant used
    in the per-level bound ``delta <= grad_bound * mean_diam``.
    """

    n: int
    schedule: list
    levels: list = field(default_factory=list)
    final_cost: float = float("nan")
    total_ms: float = 0.0
    trimmed: int = 0
    grad_bound: float = 1.0
    inner_unconverged: int = 0
    clusterings: list | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "schedule": self.schedule,
            "per_level": [
                {"rho": s.rho, "scale_cost": s.scale_cost, "delta": s.delta,
                 "mean_diam": s.mean_diam, "ms": s.ms}
                for s in self.levels
            ],
            "final_cost": self.final_cost,
            "trimmed": self.trimmed,
        }


# (block cost, rank, seed) -> (source labels, target labels)
Partitioner = Callable[[CostOracle, int, np.random.SeedSequence], tuple]


@dataclass(frozen=True)
class RefineParams:
    """Driver settings.

    Parameters
    ----------
    lrot : LrotParams
        Settings of every low-rank solve.
    threads : int
        Width of the per-level work pool.  Output does not depend on it.
    dense_block_limit : int
        Kernel-cost blocks up to this size are materialized; larger ones are
        factored (exactly for squared Euclidean, by sampling otherwise).
    metric_rank : int
        Rank of the sampled factorization of large Euclidean blocks.
    diameter_sample : int
        Points drawn per block for the diameter estimate.
    instrument : bool
        Compute scale costs and diameters.  Off for timing runs.
    keep_clusterings : bool
        Store every level's co-clustering in the report.
    partitioner : callable, optional
        Replaces the low-rank solve, e.g. :func:`brute_force_partitioner`.
    """

    lrot: LrotParams = LrotParams()
    threads: int = 1
    dense_block_limit: int = 2048
    metric_rank: int = 16
    diameter_sample: int = 64
    instrument: bool = True
    keep_clusterings: bool = False
    partitioner: Partitioner | None = None


def brute_force_partitioner(block: CostOracle, r: int, seed) -> tuple:
    """Exhaustively optimal rank-2 split; for blocks of at most 12 points."""
    res = brute_force_lrot(block.dense(), r)
    return res.source_labels, res.target_labels


def _block_oracle(cost: CostOracle, rows, cols, params: RefineParams, ss) -> CostOracle:
    if isinstance(cost, KernelCost):
        size = max(len(rows), len(cols))
        if size <= params.dense_block_limit:
            return DenseCost(cost.block(rows, cols), cost.cost_tag)
        if cost.cost_tag == "sqeuclidean":
            return factor_sqeuclidean(cost.x[rows], cost.y[cols])
        rank = min(params.metric_rank, len(rows), len(cols))
        return factor_metric_sampled(cost.x[rows], cost.y[cols], rank, seed=ss,
                                     cost_tag=cost.cost_tag)
    return restrict_cost(cost, rows, cols)


def _split_block(cost, rows, cols, r, params, ss):
    n = len(rows)
    caps = balanced_capacities(n, r)
    lrot_ss, factor_ss = ss.spawn(2)
    block = _block_oracle(cost, rows, cols, params, factor_ss)
    unconverged = 0
    if params.partitioner is not None:
        src, tgt = params.partitioner(block, r, lrot_ss)
    else:
        a = np.full(n, 1.0 / n)
        res = solve_lrot(block, a, a, r, params.lrot, seed=lrot_ss)
        unconverged = res.inner_unconverged
        if res.constant:
            # every balanced split is optimal; use index order
            src = tgt = np.repeat(np.arange(r), caps)
        else:
            src = harden(res.factors.Q, caps).labels
            tgt = harden(res.factors.R, caps).labels
    src = np.asarray(src)
    tgt = np.asarray(tgt)
    return [(rows[src == z], cols[tgt == z]) for z in range(r)], unconverged


def _solve_leaf(cost, rows, cols):
    if len(rows) == 1:
        return cols
    block = cost.block(rows, cols)
    return cols[hungarian(block).perm]


def hierarchical_refine(X, Y, cost: CostOracle, schedule: RankSchedule,
                        params: RefineParams | None = None, seed: int = 0):
    """Bijective map from ``X`` to ``Y`` by recursive co-partitioning.

    Parameters
    ----------
    X, Y : Dataset or array_like
        Equal-size point clouds; ``len(X)`` must equal ``schedule.n``.
    cost : CostOracle
        Cost between ``X`` (rows) and ``Y`` (columns).
    schedule : RankSchedule
        Ranks per level and leaf size.
    seed : int
        Master seed.  Block ``q`` of level ``t`` is seeded from
        ``(seed, t, q)``, so results do not depend on execution order.

    Returns
    -------
    (Bijection, RefineReport)
    """
    params = params or RefineParams()
    x = as_points(X)
    y = as_points(Y)
    n = x.shape[0]
    if y.shape[0] != n:
        raise SizeError(f"source has {n} points, target has {y.shape[0]}")
    if cost.shape != (n, n):
        raise SizeError(f"cost shape {cost.shape} does not match n = {n}")
    if schedule.n != n:
        raise ScheduleError(f"schedule covers {schedule.n} points, data has {n}")

    t_start = time.perf_counter()
    report = RefineReport(n=n, schedule=schedule.as_list(), trimmed=schedule.trimmed,
                          grad_bound=_grad_bound(cost, x, y))
    if params.keep_clusterings:
        report.clusterings = []
    pairs = [(np.arange(n), np.arange(n))]
    pool = ThreadPoolExecutor(max_workers=params.threads) if params.threads > 1 else None
    try:
        for t, r in enumerate(schedule.ranks):
            tic = time.perf_counter()
            jobs = [(rows, cols, r, np.random.SeedSequence([seed, t, q]))
                    for q, (rows, cols) in enumerate(pairs)]
            run = lambda job: _split_block(cost, job[0], job[1], job[2], params, job[3])  # noqa: E731
            results = list(pool.map(run, jobs)) if pool else [run(j) for j in jobs]
            split_ms = (time.perf_counter() - tic) * 1e3
            _record(report, cost, x, y, CoClustering(t, pairs, len(pairs)), params, seed, split_ms)
            pairs = [child for children, _ in results for child in children]
            report.inner_unconverged += sum(u for _, u in results)

        tic = time.perf_counter()
        perm = np.empty(n, dtype=np.int64)
        run_leaf = lambda pair: _solve_leaf(cost, pair[0], pair[1])  # noqa: E731
        matched = list(pool.map(run_leaf, pairs)) if pool else [run_leaf(p) for p in pairs]
        for (rows, _), out in zip(pairs, matched):
            perm[rows] = out
        leaf_ms = (time.perf_counter() - tic) * 1e3
    finally:
        if pool:
            pool.shutdown()

    _record(report, cost, x, y, CoClustering(len(schedule.ranks), pairs, len(pairs)),
            params, seed, leaf_ms)
    final = float(cost.pair_values(np.arange(n), perm).sum() / n)
    if params.instrument:
        diam = float(np.mean(np.linalg.norm(x - y[perm], axis=1)))
        report.levels.append(LevelStats(len(report.levels), n, final, None, diam, 0.0, (1,)))
        _fill_deltas(report)
        if params.keep_clusterings:
            singles = [(np.array([i]), perm[i:i + 1]) for i in range(n)]
            report.clusterings.append(CoClustering(len(report.levels) - 1, singles, n))
    report.final_cost = final
    report.total_ms = (time.perf_counter() - t_start) * 1e3
    return Bijection(perm, final), report


def _record(report, cost, x, y, clustering, params, seed, ms):
    if params.keep_clusterings:
        report.clusterings.append(clustering)
    if not params.instrument:
        report.levels.append(LevelStats(clustering.level, clustering.rho, float("nan"), None,
                                        float("nan"), ms, _sizes(clustering)))
        return
    sc = scale_cost(cost, clustering, seed=seed)
    diams = cocluster_diameter_sample(x, y, clustering, params.diameter_sample,
                                      seed=[seed, clustering.level])
    report.levels.append(LevelStats(clustering.level, clustering.rho, sc, None,
                                    float(np.mean(diams)), ms, _sizes(clustering)))


def _sizes(clustering):
    return tuple(sorted({len(r) for r, _ in clustering.pairs}))


def _fill_deltas(report):
    lv = report.levels
    for t in range(len(lv) - 1):
        delta = lv[t].scale_cost - lv[t + 1].scale_cost
        if delta < 0:
            log.info("scale cost rose from level %d to %d by %.3g", t, t + 1, -delta)
        lv[t] = lv[t]._replace(delta=delta)


def _grad_bound(cost, x, y):
    """Lipschitz constant of the cost on the data's bounding region."""
    if getattr(cost, "cost_tag", None) == "sqeuclidean":
        both = np.vstack([x, y])
        span = both.max(axis=0) - both.min(axis=0)
        return 2.0 * float(np.linalg.norm(span))
    return 1.0


def scale_cost(cost: CostOracle, clustering: CoClustering, seed: int = 0) -> float:
    """``<C, P^(t)>`` for the block coupling of a co-clustering.

    ``P^(t)`` spreads mass ``1/n`` of each source point uniformly over the
    target points of its block, i.e. weight ``1/(n m_q)`` inside block ``q``
    of size ``m_q`` (``rho_t / n^2`` for equal blocks).  Factored and squared
    Euclidean kernel costs use exact O(block * k) contractions; Euclidean
    kernel blocks beyond :data:`EXACT_PAIR_LIMIT` pairs are estimated from
    a fixed-seed sample of pairs.
    """
    n = sum(len(r) for r, _ in clustering.pairs)
    total = 0.0
    rng = None
    for rows, cols in clustering.pairs:
        block_sum = _block_sum(cost, rows, cols)
        if block_sum is None:
            if rng is None:
                rng = np.random.default_rng([seed, clustering.level])
            i = rows[rng.integers(len(rows), size=_SCALE_SAMPLES)]
            j = cols[rng.integers(len(cols), size=_SCALE_SAMPLES)]
            block_sum = float(cost.pair_values(i, j).mean()) * len(rows) * len(cols)
        total += block_sum / (n * len(cols))
    return float(total)


def _block_sum(cost, rows, cols):
    if isinstance(cost, FactoredCost):
        return float(cost.U[rows].sum(axis=0) @ cost.V[cols].sum(axis=0))
    if isinstance(cost, DenseCost):
        return float(cost.matrix[np.ix_(rows, cols)].sum())
    if isinstance(cost, KernelCost) and cost.cost_tag == "sqeuclidean":
        xs = cost.x[rows]
        ys = cost.y[cols]
        return float(len(cols) * np.sum(xs * xs) + len(rows) * np.sum(ys * ys)
                     - 2.0 * xs.sum(axis=0) @ ys.sum(axis=0))
    if len(rows) * len(cols) > EXACT_PAIR_LIMIT:
        return None
    return float(sum(float(tile.sum()) for _, _, tile in
                     cost.restrict(rows, cols).row_tiles()))


def cocluster_diameter_sample(X, Y, clustering: CoClustering, sample: int = 64, seed=0) -> np.ndarray:
    """Per-block diameter of ``X_q`` union ``Y_q``, estimated from a sample.

    Draws ``sample`` points uniformly without replacement from the union and
    returns their largest pairwise distance; exact when the union is no
    larger than ``sample``.
    """
    if sample < 2:
        raise SizeError("sample must be >= 2")
    x = as_points(X)
    y = as_points(Y)
    rng = np.random.default_rng(seed)
    out = np.empty(len(clustering.pairs))
    for q, (rows, cols) in enumerate(clustering.pairs):
        pts = np.vstack([x[rows], y[cols]])
        if len(pts) > sample:
            pts = pts[rng.choice(len(pts), size=sample, replace=False)]
        out[q] = float(pdist(pts).max()) if len(pts) > 1 else 0.0
    return out
