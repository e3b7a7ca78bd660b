"""Balanced low-rank optimal transport and capacity-constrained rounding.

The coupling is ``P = Q diag(1/g) R^T`` with ``Q`` in ``Pi(a, g)``, ``R`` in
``Pi(b, g)`` and ``g`` fixed to ``1/r``.  The objective
``<C, Q diag(1/g) R^T>`` is linear in each factor, so alternating
mirror-descent (KL-prox) steps reduce it monotonically.  Each prox step is a
small ``n x r`` matrix-scaling problem solved by :func:`hiref._backend.sinkhorn_rect`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from .core import CostOracle, as_cost_oracle
from .errors import CapacityError, RankError, ValidationError

_LOG_FLOOR = 1e-300
SMALL_BLOCK = 256
SMALL_RESTARTS = 4
WARM_SWEEPS = 5


@dataclass(frozen=True)
class LrotParams:
    """Solver settings.

    Parameters
    ----------
    gamma : float
        Step control: each prox step uses ``eps = max|grad| / gamma``.
    max_outer : int
        Maximum number of alternating (Q, R) rounds.
    tol_outer : float
        Stop once the relative objective decrease of a round drops below this.
    inner_tol, inner_max_iter
        Column L1 tolerance and sweep cap of each matrix-scaling projection.
    init_noise : float
        Half-width of the multiplicative uniform noise on the product start.
    restarts : int, optional
        Independent starts; the lowest final objective wins.  By default
        small problems (``n <= 256``) get 4 starts and larger ones 1.
    """

    gamma: float = 100.0
    max_outer: int = 30
    tol_outer: float = 1e-6
    inner_tol: float = 1e-5
    inner_max_iter: int = 1000
    init_noise: float = 0.1
    restarts: int | None = None

    def __post_init__(self):
        if self.gamma <= 0 or self.max_outer < 1 or self.inner_max_iter < 1 or (
                self.restarts is not None and self.restarts < 1):
            raise ValidationError("invalid low-rank solver parameters")


class CouplingFactors(NamedTuple):
    Q: np.ndarray
    R: np.ndarray
    g: np.ndarray


class LrotResult(NamedTuple):
    """Factors plus diagnostics.

    ``trace`` holds the objective at the start and after every round;
    ``inner_unconverged`` counts projections that hit their sweep cap;
    ``constant`` is set when the cost is flat on the block, in which case
    every balanced partition is optimal and the factors are left at the
    product start.
    """

    factors: CouplingFactors
    trace: list
    inner_unconverged: int
    constant: bool


class HardAssignment(NamedTuple):
    labels: np.ndarray
    capacities: np.ndarray


def balanced_capacities(n: int, r: int) -> np.ndarray:
    """Floor/ceil split of ``n`` into ``r`` parts, larger parts first."""
    base, extra = divmod(n, r)
    caps = np.full(r, base, dtype=np.int64)
    caps[:extra] += 1
    return caps


def objective(cost: CostOracle, factors: CouplingFactors) -> float:
    """``<C, Q diag(1/g) R^T>`` without forming the coupling."""
    Q, R, g = factors
    return float(np.sum(Q * (as_cost_oracle(cost).matmul(R) / g)))


def _round_to_marginals(P, a, b):
    """Nearest-feasible rounding onto ``Pi(a, b)`` (row, column, rank-one fix)."""
    rows = P.sum(axis=1)
    P *= np.minimum(1.0, a / np.where(rows > 0, rows, 1.0))[:, None]
    cols = P.sum(axis=0)
    P *= np.minimum(1.0, b / np.where(cols > 0, cols, 1.0))[None, :]
    # deficits are nonnegative up to rounding; clip so the fix keeps P >= 0
    err_r = np.maximum(a - P.sum(axis=1), 0.0)
    err_c = np.maximum(b - P.sum(axis=0), 0.0)
    s = err_r.sum()
    if s > 0:
        P += np.outer(err_r, err_c) / s
    return P


class _Side:
    """One factor in log form with its warm-started column scaling."""

    def __init__(self, log_q, a, g, params):
        self.a = a
        self.g = g
        self.params = params
        self.v = np.zeros(len(g))
        self.unconverged = 0
        self.accept(self.project(log_q))

    def project(self, log_k):
        p = self.params
        log_k = np.ascontiguousarray(log_k)
        u, residual = scale_columns(log_k, self.a, self.g, self.v, p.inner_tol, p.inner_max_iter)
        if residual > p.inner_tol:
            self.unconverged += 1
        q = np.exp(log_k + u[:, None] + self.v[None, :])
        q = _round_to_marginals(q, self.a, self.g)
        return q

    def accept(self, q):
        self.q = q
        self.log_q = np.log(np.maximum(q, _LOG_FLOOR))


def scale_columns(log_k, a, b, v, tol, max_iter):
    """Find ``u``, ``v`` with ``exp(log_k + u + v)`` in ``Pi(a, b)``.

    Rows are matched exactly; columns to ``tol`` in L1.  A few plain
    scaling sweeps warm up ``v`` (updated in place); if they fall short, a
    damped Newton method maximizes the concave semi-dual
    ``b.v - sum_i a_i logsumexp_z(log_k[i, z] + v_z)``, whose Hessian is only
    ``r x r``.  Peaked kernels that stall plain scaling for thousands of
    sweeps typically need tens of Newton steps.

    Returns ``(u, residual)``.
    """
    u, residual, it = _backend.sinkhorn_rect(log_k, a, b, v, tol, min(WARM_SWEEPS, max_iter))
    if residual <= tol or it >= max_iter:
        return u, residual
    r = len(b)
    phi, probs, cols, lse = _semi_dual(log_k, a, b, v)
    for _ in range(max_iter - it):
        grad = b - cols
        residual = float(np.abs(grad).sum())
        if residual <= tol:
            break
        hess = np.diag(cols) - (probs * a[:, None]).T @ probs
        # the semi-dual is flat along the all-ones direction
        hess += cols.mean() / r + 1e-12 * max(cols.max(), 1e-300) * np.eye(r)
        step_dir = np.linalg.solve(hess, grad)
        slope = float(grad @ step_dir)
        step = 1.0
        while True:
            trial = v + step * step_dir
            t_phi, t_probs, t_cols, t_lse = _semi_dual(log_k, a, b, trial)
            if t_phi >= phi + 1e-4 * step * slope or step < 1e-12:
                break
            step *= 0.5
        v[:] = trial
        phi, probs, cols, lse = t_phi, t_probs, t_cols, t_lse
    else:
        residual = float(np.abs(b - cols).sum())
    return np.log(a) - lse, residual


def _semi_dual(log_k, a, b, v):
    t = log_k + v
    mx = t.max(axis=1)
    e = np.exp(t - mx[:, None])
    s = e.sum(axis=1)
    lse = mx + np.log(s)
    probs = e / s[:, None]
    return float(b @ v - a @ lse), probs, a @ probs, lse


def _flat(grad) -> bool:
    spread = float(grad.max() - grad.min())
    return spread <= 1e-12 * max(1.0, float(np.abs(grad).max()))


def solve_lrot(cost, a, b, r: int, params: LrotParams | None = None, seed=0) -> LrotResult:
    """Minimize ``<C, Q diag(1/g) R^T>`` over balanced factors of rank ``r``.

    Parameters
    ----------
    cost : CostOracle or array_like
        ``n x m`` cost; a :class:`~hiref.core.FactoredCost` keeps every
        gradient evaluation at ``O((n + m) k r)``.
    a, b : array_like
        Row and column marginals (probability vectors).
    r : int
        Rank, ``2 <= r <= min(n, m)``.
    seed : int or numpy.random.SeedSequence
        Seeds the multiplicative noise on the initial product coupling.
    """
    cost = as_cost_oracle(cost)
    params = params or LrotParams()
    n, m = cost.shape
    if r < 2 or r > min(n, m):
        raise RankError(f"rank must lie in [2, {min(n, m)}], got {r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (n,) or b.shape != (m,):
        raise ValidationError("marginals do not match the cost shape")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    restarts = params.restarts or (SMALL_RESTARTS if max(n, m) <= SMALL_BLOCK else 1)
    best = None
    for child in ss.spawn(restarts) if restarts > 1 else [ss]:
        res = _solve_once(cost, a, b, r, params, np.random.default_rng(child))
        if best is None or res.trace[-1] < best.trace[-1]:
            best = res
        if res.constant:
            break
    return best


def _solve_once(cost, a, b, r, params, rng):
    n, m = cost.shape
    g = np.full(r, 1.0 / r)
    lo, hi = 1.0 - params.init_noise, 1.0 + params.init_noise
    qs = _Side(np.log(np.outer(a, g) * rng.uniform(lo, hi, (n, r))), a, g, params)
    rs = _Side(np.log(np.outer(b, g) * rng.uniform(lo, hi, (m, r))), b, g, params)

    grad_q = cost.matmul(rs.q) / g
    obj = float(np.sum(qs.q * grad_q))
    trace = [obj]
    if _flat(grad_q) and _flat(cost.rmatmul(qs.q) / g):
        return LrotResult(CouplingFactors(qs.q, rs.q, g), trace, 0, True)

    for _ in range(params.max_outer):
        start = obj
        # Q step: linear objective <grad_q, Q>
        q_new = qs.project(qs.log_q - grad_q / _step(grad_q, params))
        new = float(np.sum(q_new * grad_q))
        if new <= obj:
            qs.accept(q_new)
            obj = new
        grad_r = cost.rmatmul(qs.q) / g
        r_new = rs.project(rs.log_q - grad_r / _step(grad_r, params))
        new = float(np.sum(r_new * grad_r))
        if new <= obj:
            rs.accept(r_new)
            obj = new
        grad_q = cost.matmul(rs.q) / g
        obj = float(np.sum(qs.q * grad_q))
        trace.append(obj)
        if start - obj <= params.tol_outer * max(abs(start), 1e-300):
            break
    return LrotResult(CouplingFactors(qs.q, rs.q, g), trace,
                      qs.unconverged + rs.unconverged, False)


def _step(grad, params):
    scale = float(np.abs(grad).max())
    return scale / params.gamma if scale > 0 else 1.0


def harden(factors, capacities) -> HardAssignment:
    """Round soft factor rows to labels that exactly meet ``capacities``.

    Points are visited by decreasing margin between their two largest
    weights; each takes its heaviest cluster that still has room.  One repair
    pass then swaps pairs of points between two clusters whenever the swap
    increases the total kept weight ``sum_i M[i, label_i]``; cluster pairs are
    handled in decreasing order of their best possible gain and each point
    moves at most once.

    ``factors`` is an ``n x r`` weight matrix, or a :class:`CouplingFactors`
    whose ``Q`` is used.
    """
    M = factors.Q if isinstance(factors, CouplingFactors) else factors
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValidationError("factor must be a 2-D array")
    n, r = M.shape
    caps = np.asarray(capacities, dtype=np.int64)
    if caps.shape != (r,) or (caps < 0).any() or int(caps.sum()) != n:
        raise CapacityError(f"capacities {caps.tolist()} do not split {n} points into {r} parts")
    if r == 1:
        return HardAssignment(np.zeros(n, dtype=np.int64), caps)
    top2 = -np.partition(-M, 1, axis=1)[:, :2]
    order = np.argsort(-(top2[:, 0] - top2[:, 1]), kind="stable").astype(np.int64)
    labels = _backend.greedy_capacity(M, order, caps)
    _repair(M, labels)
    return HardAssignment(labels, caps)


def _repair(M, labels):
    n, r = M.shape
    kept = M[np.arange(n), labels]
    # potential gain for moving each point to each other cluster
    pull = M - kept[:, None]
    pairs = []
    for A in range(r):
        in_a = labels == A
        if not in_a.any():
            continue
        best_a = pull[in_a].max(axis=0)
        for B in range(A + 1, r):
            in_b = labels == B
            if not in_b.any():
                continue
            gain = best_a[B] + pull[in_b, A].max()
            if gain > 0 and max(best_a[B], pull[in_b, A].max()) > 0:
                pairs.append((-gain, A, B))
    pairs.sort()
    moved = np.zeros(n, dtype=bool)
    for _, A, B in pairs:
        ia = np.flatnonzero((labels == A) & ~moved)
        ib = np.flatnonzero((labels == B) & ~moved)
        if len(ia) == 0 or len(ib) == 0:
            continue
        da = M[ia, B] - M[ia, A]
        db = M[ib, A] - M[ib, B]
        ia = ia[np.argsort(-da, kind="stable")]
        ib = ib[np.argsort(-db, kind="stable")]
        da = np.sort(da)[::-1]
        db = np.sort(db)[::-1]
        k = min(len(da), len(db))
        swap = np.flatnonzero(da[:k] + db[:k] > 0)
        if len(swap) == 0:
            continue
        # gains are decreasing in the pair index, so the positive ones lead
        cnt = int(swap[-1]) + 1
        labels[ia[:cnt]] = B
        labels[ib[:cnt]] = A
        moved[ia[:cnt]] = True
        moved[ib[:cnt]] = True
