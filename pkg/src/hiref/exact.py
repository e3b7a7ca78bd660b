"""Exact solvers: linear assignment and exhaustive rank-2 partitioning."""

from __future__ import annotations

from itertools import combinations
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import NumericalError, ShapeError, TooLargeError, ValidationError

BRUTE_FORCE_MAX_N = 12


class Assignment(NamedTuple):
    """A bijection ``i -> perm[i]`` and its cost with uniform weights ``1/n``."""

    perm: np.ndarray
    cost: float

    def plan(self) -> np.ndarray:
        """Dense scaled permutation matrix with entries ``1/n``."""
        n = len(self.perm)
        p = np.zeros((n, n))
        p[np.arange(n), self.perm] = 1.0 / n
        return p


def hungarian(cost) -> Assignment:
    """Minimum-cost perfect matching of a square cost matrix.

    Shortest augmenting paths with potentials, ``O(n^3)``.  Among optimal
    matchings the one found depends only on the matrix; ties in the column
    scan go to the lowest index.

    Examples
    --------
    >>> hungarian([[1.0, 0.0], [0.0, 1.0]]).perm.tolist()
    [1, 0]
    """
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"cost must be square, got shape {c.shape}")
    if not np.isfinite(c).all():
        raise NumericalError("cost has non-finite entries")
    n = c.shape[0]
    if n == 0:
        return Assignment(np.zeros(0, dtype=np.int64), 0.0)
    perm = _backend.lsap(c)
    return Assignment(perm, float(c[np.arange(n), perm].sum() / n))


class Bipartition(NamedTuple):
    """Balanced two-way labels for both sides; label ``z`` pairs with ``z``."""

    source_labels: np.ndarray
    target_labels: np.ndarray
    objective: float


def rank2_objective(cost, source_labels, target_labels) -> float:
    """``<C, Q diag(1/g) R^T>`` for hard balanced rank-2 factors."""
    c = np.asarray(cost, dtype=np.float64)
    n = c.shape[0]
    total = 0.0
    for z in (0, 1):
        total += c[np.ix_(source_labels == z, target_labels == z)].sum()
    return 2.0 * total / (n * n)


def brute_force_lrot(cost, r: int = 2) -> Bipartition:
    """Best hard rank-2 coupling by enumerating all balanced bipartitions.

    The source subset holding index 0 is cluster 0; every target subset is
    tried as its partner, which covers both block matchings.  Returns the
    first minimizer in enumeration order.
    """
    c = np.asarray(cost, dtype=np.float64)
    if r != 2:
        raise ValidationError("exhaustive search is implemented for r = 2 only")
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"cost must be square, got shape {c.shape}")
    n = c.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise TooLargeError(f"n = {n} exceeds {BRUTE_FORCE_MAX_N}")
    if n < 2 or n % 2:
        raise ValidationError(f"n must be even and >= 2, got {n}")
    half = n // 2
    src = np.array([s for s in combinations(range(n), half) if s[0] == 0])
    tgt = np.array(list(combinations(range(n), half)))
    ia = np.zeros((len(src), n))
    ia[np.arange(len(src))[:, None], src] = 1.0
    ib = np.zeros((len(tgt), n))
    ib[np.arange(len(tgt))[:, None], tgt] = 1.0
    inside = ia @ c @ ib.T
    # sum over the complementary blocks by inclusion-exclusion
    outside = c.sum() - (ia @ c.sum(axis=1))[:, None] - (ib @ c.sum(axis=0))[None, :] + inside
    obj = 2.0 * (inside + outside) / (n * n)
    k = int(np.argmin(obj))
    a, b = divmod(k, len(tgt))
    source_labels = 1 - ia[a].astype(np.int64)
    target_labels = 1 - ib[b].astype(np.int64)
    return Bipartition(source_labels, target_labels, float(obj[a, b]))
