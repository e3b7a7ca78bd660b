"""Mini-batch OT and a shared streaming evaluator of ``<C, P>``."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from .core import CostOracle, as_cost_oracle, as_points
from .entropic import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    EntropicPlan,
    EntropicProblem,
    PlanStats,
    plan_stats,
    round_plan,
    sinkhorn,
)
from .errors import SizeError, ValidationError


class PairPlan(NamedTuple):
    """Sparse plan given as index pairs and their masses."""

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray


class MiniBatchPlan(NamedTuple):
    """Batches of paired indices and the entropic solution of each.

    The global plan puts weight ``B_k / n`` on batch ``k``'s coupling, which
    gives every point mass ``1/n``.
    """

    batch_size: int
    pairs: list
    plans: list

    @property
    def n(self) -> int:
        return sum(len(r) for r, _ in self.pairs)

    def marginals(self):
        """Row and column sums of the stitched plan."""
        n = self.n
        row = np.zeros(n)
        col = np.zeros(n)
        for (rows, cols), plan in zip(self.pairs, self.plans):
            w = len(rows) / n
            for start, stop, pt, _ in plan.tiles():
                row[rows[start:stop]] += w * pt.sum(axis=1)
                col[cols] += w * pt.sum(axis=0)
        return row, col


def minibatch_ot(X, Y, cost: CostOracle, batch_size: int, epsilon: float = DEFAULT_EPSILON,
                 seed: int = 0, schedule="auto", max_iters: int = DEFAULT_MAX_ITERS,
                 tol: float = DEFAULT_TOL, threads: int = 1):
    """Entropic OT on random batch pairs, stitched into one coupling.

    Both index sets are shuffled with ``seed`` and cut into consecutive
    batches of ``batch_size`` (the last may be smaller); batch ``k`` of the
    source is paired with batch ``k`` of the target.  With a single batch
    the points keep their natural order, so the result equals a direct
    :func:`~hiref.entropic.sinkhorn` solve.  A batch whose solve ends above
    ``tol`` is passed through :func:`~hiref.entropic.round_plan`, so the
    stitched plan always has uniform marginals.

    Returns
    -------
    (MiniBatchPlan, float)
        The plan and its linear cost ``sum_k (B_k / n) <C_k, P_k>``.
    """
    cost = as_cost_oracle(cost)
    n = as_points(X).shape[0]
    if as_points(Y).shape[0] != n or cost.shape != (n, n):
        raise SizeError("mini-batch OT needs equal-size clouds and a matching cost")
    if batch_size < 2 or batch_size > n:
        raise ValidationError(f"batch size must lie in [2, {n}], got {batch_size}")
    if batch_size == n:
        pairs = [(np.arange(n), np.arange(n))]
    else:
        rng = np.random.default_rng(seed)
        src = rng.permutation(n)
        tgt = rng.permutation(n)
        pairs = [(src[k:k + batch_size], tgt[k:k + batch_size]) for k in range(0, n, batch_size)]

    def solve(pair):
        rows, cols = pair
        sub = cost if len(pairs) == 1 else cost.restrict(rows, cols)
        problem = EntropicProblem(sub, epsilon=epsilon, schedule=schedule)
        pot, residual = sinkhorn(problem, max_iters=max_iters, tol=tol)
        # a batch still off its marginals after the budget is rounded onto them
        plan = EntropicPlan(problem, pot) if residual <= tol else round_plan(problem, pot)
        return plan, plan.cost()

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = list(pool.map(solve, pairs))
    else:
        solved = [solve(p) for p in pairs]
    total = 0.0
    for (rows, _), (_, c) in zip(pairs, solved):
        total += (len(rows) / n) * c
    return MiniBatchPlan(batch_size, pairs, [p for p, _ in solved]), float(total)


def plan_cost_streaming(cost, plan) -> float:
    """``<C, P>`` accumulated without forming ``C`` in full.

    ``plan`` may be a bijection (anything with ``perm``; mass ``1/n`` per
    pair), a :class:`PairPlan`, an :class:`~hiref.entropic.EntropicPlan`
    (evaluated against ``cost``), a :class:`MiniBatchPlan`, or a dense array.
    """
    cost = as_cost_oracle(cost)
    if hasattr(plan, "perm"):
        perm = np.asarray(plan.perm)
        return float(cost.pair_values(np.arange(len(perm)), perm).sum() / len(perm))
    if isinstance(plan, PairPlan):
        return float(np.dot(cost.pair_values(plan.rows, plan.cols), plan.weights))
    if isinstance(plan, EntropicPlan):
        return _entropic_against(cost, plan)
    if isinstance(plan, MiniBatchPlan):
        n = plan.n
        total = 0.0
        for (rows, cols), sub in zip(plan.pairs, plan.plans):
            total += (len(rows) / n) * _entropic_against(cost.restrict(rows, cols), sub)
        return float(total)
    p = np.asarray(plan, dtype=np.float64)
    if p.shape != cost.shape:
        raise SizeError(f"plan shape {p.shape} does not match cost shape {cost.shape}")
    return float(sum(np.sum(tile * p[start:stop]) for start, stop, tile in cost.row_tiles()))


def _entropic_against(cost, plan):
    total = 0.0
    for (start, stop, pt, _), (_, _, tile) in zip(plan.tiles(), cost.row_tiles()):
        total += float(np.sum(pt * tile))
    return total


def minibatch_plan_stats(plan: MiniBatchPlan, threshold: float = 1e-8):
    """:func:`~hiref.entropic.plan_stats` of the stitched plan."""
    n = plan.n
    eq4 = shannon = 0.0
    nonzeros = 0
    for (rows, _), sub in zip(plan.pairs, plan.plans):
        st = plan_stats((len(rows) / n) * sub.dense(), threshold)
        eq4 += st.entropy
        shannon += st.entropy_shannon
        nonzeros += st.nonzeros
    return PlanStats(eq4, nonzeros, shannon)
