"""Independent reference computations shared by the test modules."""

import numpy as np


def ordered_factorizations(m, max_len):
    """Every ordered tuple of factors >= 2 with product ``m`` and length <= ``max_len``."""
    if m == 1:
        return [()]
    if max_len == 0:
        return []
    out = []
    for r in range(2, m + 1):
        if m % r == 0:
            out.extend((r,) + rest for rest in ordered_factorizations(m // r, max_len - 1))
    return out


def prefix_sum(ranks):
    total, rho = 0, 1
    for r in ranks:
        rho *= r
        total += rho
    return total


class ScheduleTable:
    """All candidate schedules of ``n`` as arrays for fast constrained minima."""

    def __init__(self, n, max_depth):
        rows = []
        for q in range(1, n):
            if n % q == 0:
                for f in ordered_factorizations(n // q, max_depth):
                    rows.append((q, len(f), max(f), prefix_sum(f)))
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
        self.base, self.length, self.largest, self.objective = arr.T

    def best(self, depth, r_max, q_max):
        """Minimum objective under the caps, or None when nothing qualifies."""
        ok = (self.length <= depth) & (self.largest <= r_max) & (self.base <= q_max)
        if not ok.any():
            return None
        return int(self.objective[ok].min())


def brute_schedule_objective(n, depth, r_max, q_max):
    return ScheduleTable(n, depth).best(depth, r_max, q_max)


def direct_distances(x, y, squared=False):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.empty((len(x), len(y)))
    for i, p in enumerate(x):
        for j, q in enumerate(y):
            s = float(np.sum((p - q) ** 2))
            out[i, j] = s if squared else np.sqrt(s)
    return out


def block_coupling(n, pairs):
    """Dense hierarchical block coupling: ``rho / n^2`` on every in-block pair."""
    p = np.zeros((n, n))
    rho = len(pairs)
    for rows, cols in pairs:
        p[np.ix_(rows, cols)] = rho / n**2
    return p


def separated_clusters(r, size, seed, spread=0.1, gap=10.0, dim=2):
    """``r`` tight clusters per side with inter-cluster gaps far above their width."""
    rng = np.random.default_rng(seed)
    centers = gap * rng.permutation(np.arange(r * 3))[:r, None] * np.eye(dim)[0]
    centers = centers + gap * rng.normal(size=(r, dim)) * 0.1
    x = np.concatenate([c + spread * rng.random((size, dim)) for c in centers])
    y = np.concatenate([c + spread * rng.random((size, dim)) for c in centers])
    return x, y[rng.permutation(len(y))]


class ScheduleRanking:
    """Every schedule of ``n`` listed best first under the documented tie-break.

    Order: objective, then larger base, then lexicographically smaller ranks.
    :meth:`first` returns the leading entry that satisfies the caps.
    """

    def __init__(self, n, max_depth):
        rows = []
        for q in range(1, n):
            if n % q == 0:
                for f in ordered_factorizations(n // q, max_depth):
                    rows.append((prefix_sum(f), -q, f))
        rows.sort()
        self.rows = rows
        self.base = np.array([-q for _, q, _ in rows], dtype=np.int64)
        self.length = np.array([len(f) for _, _, f in rows], dtype=np.int64)
        self.largest = np.array([max(f, default=1) for _, _, f in rows], dtype=np.int64)

    def first(self, depth, r_max, q_max):
        """``(ranks, base)`` of the winning schedule, or None."""
        ok = (self.length <= depth) & (self.largest <= r_max) & (self.base <= q_max)
        if not ok.any():
            return None
        _, neg_q, ranks = self.rows[int(np.argmax(ok))]
        return ranks, -neg_q
