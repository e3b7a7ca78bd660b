"""Log-domain Sinkhorn for entropy-regularized optimal transport.

The coupling is kept implicit through dual potentials ``(f, g)``:

    P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)

and is only formed tile by tile when a statistic of it is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp, xlogy

from . import _backend
from .core import CostOracle, as_cost_oracle
from .errors import NumericalError, ValidationError

DEFAULT_EPSILON = 0.05
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 2000
# levels before the last only need rough potentials to warm-start the next
INTERMEDIATE_TOL = 1e-2
NONZERO_THRESHOLD = 1e-8

# cost matrices up to this many entries are materialized once per solve
DENSE_LIMIT = 1 << 22


def _probability(vec, name, size):
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (size,):
        raise ValidationError(f"{name} must have shape ({size},), got {v.shape}")
    if not np.isfinite(v).all() or (v < 0).any():
        raise ValidationError(f"{name} must be finite and nonnegative")
    if abs(v.sum() - 1.0) > 1e-12:
        raise ValidationError(f"{name} must sum to 1, sums to {v.sum()!r}")
    return v


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _log(v):
    # zero marginal mass maps to -inf, which removes the point from the plan
    with np.errstate(divide="ignore"):
        return np.log(v)


@dataclass(frozen=True, eq=False)
class EntropicProblem:
    """Cost, marginals and regularization strength.

    ``schedule`` is ``None`` (solve at ``epsilon`` directly), ``"auto"``
    (see :func:`default_schedule`) or a strictly decreasing sequence ending at
    ``epsilon``.  ``a`` and ``b`` default to uniform weights.
    """

    cost: CostOracle
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    epsilon: float = DEFAULT_EPSILON
    schedule: tuple | str | None = None

    def __post_init__(self):
        cost = as_cost_oracle(self.cost)
        n, m = cost.shape
        a = uniform(n) if self.a is None else _probability(self.a, "a", n)
        b = uniform(m) if self.b is None else _probability(self.b, "b", m)
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon!r}")
        sched = self.schedule
        if isinstance(sched, str):
            if sched != "auto":
                raise ValidationError(f"unknown schedule {sched!r}")
        elif sched is not None:
            sched = tuple(float(e) for e in sched)
            if not sched or sched[-1] != eps:
                raise ValidationError("schedule must end at epsilon")
            if any(e <= 0 for e in sched) or any(x <= y for x, y in zip(sched, sched[1:])):
                raise ValidationError("schedule must be positive and strictly decreasing")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "schedule", sched)

    def epsilons(self) -> tuple:
        if self.schedule is None:
            return (self.epsilon,)
        if self.schedule == "auto":
            lo, hi = _cost_range(self.cost)
            return default_schedule(hi - lo, self.epsilon)
        return self.schedule


def default_schedule(spread: float, epsilon: float, factor: float = 0.5) -> tuple:
    """Geometric schedule from ``0.5 * spread`` down to ``epsilon``."""
    out = []
    e = 0.5 * spread
    while e > epsilon:
        out.append(e)
        e *= factor
    out.append(float(epsilon))
    return tuple(out)


def _cost_range(cost: CostOracle):
    lo, hi = np.inf, -np.inf
    for _, _, tile in cost.row_tiles():
        lo = min(lo, float(tile.min()))
        hi = max(hi, float(tile.max()))
    return lo, hi


class DualPotentials(NamedTuple):
    f: np.ndarray
    g: np.ndarray


class SinkhornResult(tuple):
    """``(potentials, residual)`` pair carrying run diagnostics.

    Attributes
    ----------
    n_iter : int
        Total iterations over all schedule levels and passes.
    history : list of (epsilon, DualPotentials, residual, iterations)
        One entry per solved level; a strict second pass appends its own.
    """

    def __new__(cls, potentials, residual, n_iter, history):
        self = super().__new__(cls, (potentials, residual))
        self.n_iter = n_iter
        self.history = history
        return self

    @property
    def potentials(self) -> DualPotentials:
        return self[0]

    @property
    def residual(self) -> float:
        return self[1]

    @property
    def converged_levels(self) -> int:
        return len(self.history)


class _Tiles:
    """Row tiles of a cost oracle, cached when small enough."""

    def __init__(self, cost: CostOracle):
        self.cost = cost
        n, m = cost.shape
        self.cached = [(0, n, cost.dense())] if n * m <= DENSE_LIMIT else None

    def __iter__(self):
        if self.cached is not None:
            return iter(self.cached)
        return self.cost.row_tiles()


def sinkhorn(problem: EntropicProblem, max_iters: int = DEFAULT_MAX_ITERS,
             tol: float = DEFAULT_TOL, init: DualPotentials | None = None) -> SinkhornResult:
    """Alternating log-domain updates of ``f`` and ``g``.

    Each iteration makes one marginal exact and measures the L1 error of
    the other; the last level stops when that error is at most ``tol`` or
    after ``max_iters`` iterations.  Earlier schedule levels stop at the
    looser :data:`INTERMEDIATE_TOL` and hand their potentials to the next.
    If the last level then fails to converge, the schedule is run once more
    from the same start with every level solved to ``tol``; near-vertex
    plans need that tighter hand-over.  Costs small enough to materialize
    run through the compiled scaling kernel; larger ones are streamed in
    row tiles.
    """
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    cost = problem.cost
    n, m = cost.shape
    tiles = _Tiles(cost)
    a, b = problem.a, problem.b
    # the compiled kernel needs strictly positive marginals
    dense = tiles.cached is not None and (a > 0).all() and (b > 0).all()
    if init is None:
        f0 = np.zeros(n)
        g0 = np.zeros(m)
    else:
        f0 = np.array(init.f, dtype=np.float64)
        g0 = np.array(init.g, dtype=np.float64)

    levels = problem.epsilons()
    loose = max(tol, INTERMEDIATE_TOL)
    history = []
    total = 0
    for strict in (False, True):
        if strict and (loose == tol or len(levels) == 1):
            break
        f, g = f0, g0
        residual = np.inf
        for k, eps in enumerate(levels):
            level_tol = tol if strict or k == len(levels) - 1 else loose
            if dense:
                f, g, residual, it = _level_dense(tiles.cached[0][2], a, b, f, g, eps,
                                                  level_tol, max_iters)
            else:
                f, g, residual, it = _level_tiled(tiles, a, b, f, g, eps, level_tol, max_iters)
            total += it
            history.append((eps, DualPotentials(f.copy(), g.copy()), residual, it))
        if residual <= tol:
            break
    return SinkhornResult(DualPotentials(f, g), residual, total, history)


def _level_dense(cost, a, b, f, g, eps, tol, max_iters):
    """One schedule level on a materialized cost."""
    log_a = np.log(a)
    log_b = np.log(b)
    log_k = np.ascontiguousarray(cost / -eps)
    v = log_b + g / eps
    u, residual, it = _backend.sinkhorn_rect(log_k, a, b, v, tol, max_iters)
    f = eps * (u - log_a)
    g = eps * (v - log_b)
    if not (np.isfinite(f).all() and np.isfinite(g).all()):
        raise NumericalError("non-finite potential; check the cost for inf/nan")
    return f, g, float(residual), int(it)


def _level_tiled(tiles, a, b, f, g, eps, tol, max_iters):
    """One schedule level streaming the cost in row tiles."""
    n, m = len(a), len(b)
    log_a = _log(a)
    log_b = _log(b)
    residual = np.inf
    it = 0
    while it < max_iters:
        it += 1
        f_new = np.empty(n)
        for start, stop, tile in tiles:
            f_new[start:stop] = -eps * logsumexp((g - tile) / eps + log_b, axis=1)
        if not np.isfinite(f_new).all():
            raise NumericalError("non-finite potential; check the cost for inf/nan")
        residual = float(np.sum(a * np.abs(np.expm1((f - f_new) / eps))))
        if residual <= tol and it > 1:
            it -= 1
            break
        f = f_new
        g = _g_update(tiles, f, log_a, eps, m)
        if not np.isfinite(g).all():
            raise NumericalError("non-finite potential; check the cost for inf/nan")
    else:
        # the last g update made the columns exact; measure the rows
        residual = _row_residual(tiles, f, g, a, log_b, eps)
    return f, g, residual, it


def _g_update(tiles, f, log_a, eps, m):
    parts = []
    for start, stop, tile in tiles:
        parts.append(logsumexp((f[start:stop, None] - tile) / eps + log_a[start:stop, None],
                               axis=0))
    lse = parts[0] if len(parts) == 1 else logsumexp(np.vstack(parts), axis=0)
    return -eps * lse


def _row_residual(tiles, f, g, a, log_b, eps):
    res = 0.0
    for start, stop, tile in tiles:
        lse = logsumexp((g - tile) / eps + log_b, axis=1)
        rows = np.exp(_log(a[start:stop]) + f[start:stop] / eps + lse)
        res += float(np.abs(rows - a[start:stop]).sum())
    return res


class EntropicPlan:
    """Implicit coupling of a Sinkhorn solution, evaluated by row tiles.

    Parameters
    ----------
    problem : EntropicProblem
    potentials : DualPotentials
    correction : (ndarray, ndarray), optional
        Row and column deficits ``(d_r, d_c)`` of equal total mass.  The plan
        then gains the rank-one term ``outer(d_r, d_c) / d_r.sum()``; see
        :func:`round_plan`.
    """

    def __init__(self, problem: EntropicProblem, potentials: DualPotentials, correction=None):
        self.problem = problem
        self.potentials = potentials
        self.correction = correction

    @property
    def shape(self):
        return self.problem.cost.shape

    def tiles(self):
        """Yield ``(start, stop, plan_tile, cost_tile)``."""
        p = self.problem
        f, g = self.potentials
        eps = p.epsilon
        log_b = _log(p.b)
        if self.correction is not None:
            d_r, d_c = self.correction
            d_c = d_c / d_r.sum()
        for start, stop, tile in p.cost.row_tiles():
            log_p = (f[start:stop, None] + g[None, :] - tile) / eps
            log_p += _log(p.a[start:stop])[:, None] + log_b[None, :]
            pt = np.exp(log_p)
            if self.correction is not None:
                pt += np.outer(d_r[start:stop], d_c)
            yield start, stop, pt, tile

    def marginals(self):
        """Row and column sums."""
        rows = np.empty(self.shape[0])
        cols = np.zeros(self.shape[1])
        for start, stop, pt, _ in self.tiles():
            rows[start:stop] = pt.sum(axis=1)
            cols += pt.sum(axis=0)
        return rows, cols

    def cost(self) -> float:
        """Linear transport cost ``sum P_ij C_ij``."""
        return float(sum(np.sum(pt * ct) for _, _, pt, ct in self.tiles()))

    def dense(self) -> np.ndarray:
        out = np.empty(self.shape)
        for start, stop, pt, _ in self.tiles():
            out[start:stop] = pt
        return out


def round_plan(problem: EntropicProblem, potentials: DualPotentials) -> EntropicPlan:
    """Project an approximate Sinkhorn solution onto the transport polytope.

    Rows carrying more than ``a`` are scaled down, then columns carrying
    more than ``b``; both scalings fold into the potentials.  The mass still
    missing is put back as a rank-one term, so the marginals of the result
    equal ``(a, b)`` up to rounding.  The plan moves by at most twice the L1
    marginal residual of the input.
    """
    eps = problem.epsilon
    f, g = potentials
    rows, _ = EntropicPlan(problem, potentials).marginals()
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(rows > problem.a, problem.a / rows, 1.0)
    f = f + eps * np.log(shrink)
    _, cols = EntropicPlan(problem, DualPotentials(f, g)).marginals()
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(cols > problem.b, problem.b / cols, 1.0)
    g = g + eps * np.log(shrink)
    scaled = DualPotentials(f, g)
    rows, cols = EntropicPlan(problem, scaled).marginals()
    d_r = np.maximum(problem.a - rows, 0.0)
    d_c = np.maximum(problem.b - cols, 0.0)
    if d_r.sum() <= 0.0 or d_c.sum() <= 0.0:
        return EntropicPlan(problem, scaled)
    return EntropicPlan(problem, scaled, (d_r, d_c))


def entropic_cost(problem: EntropicProblem, potentials: DualPotentials) -> float:
    """Linear transport cost ``sum P_ij C_ij`` of the implicit plan."""
    return EntropicPlan(problem, potentials).cost()


def densify_plan(problem: EntropicProblem, potentials: DualPotentials) -> np.ndarray:
    return EntropicPlan(problem, potentials).dense()


class PlanStats(tuple):
    """``(entropy, nonzeros)`` with ``entropy = -sum p (log p - 1)``.

    ``entropy_shannon`` holds ``-sum p log p``.
    """

    def __new__(cls, entropy, nonzeros, entropy_shannon):
        self = super().__new__(cls, (entropy, nonzeros))
        self.entropy_shannon = entropy_shannon
        return self

    @property
    def entropy(self) -> float:
        return self[0]

    @property
    def entropy_eq4(self) -> float:
        return self[0]

    @property
    def nonzeros(self) -> int:
        return self[1]


def plan_stats(plan, threshold: float = NONZERO_THRESHOLD) -> PlanStats:
    """Entropy in both conventions and the count of entries above ``threshold``.

    ``plan`` may be a dense array, an :class:`EntropicPlan`, or any object
    with a ``perm`` attribute (a bijection with entries ``1/n``).
    """
    if hasattr(plan, "perm"):
        n = len(plan.perm)
        chunks = [np.full(n, 1.0 / n)]
    elif isinstance(plan, EntropicPlan):
        chunks = (pt.ravel() for _, _, pt, _ in plan.tiles())
    else:
        chunks = [np.asarray(plan, dtype=np.float64).ravel()]
    shannon = 0.0
    mass = 0.0
    nonzeros = 0
    for p in chunks:
        shannon -= float(np.sum(xlogy(p, p)))
        mass += float(p.sum())
        nonzeros += int(np.count_nonzero(p > threshold))
    return PlanStats(shannon + mass, nonzeros, shannon)
