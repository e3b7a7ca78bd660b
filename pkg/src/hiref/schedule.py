"""Rank schedules for the refinement hierarchy.

A schedule splits ``n`` as ``r_1 * r_2 * ... * r_k * base``.  Level ``t``
runs one low-rank solve per block of the previous level, so the work is
governed by the running products ``rho_t = r_1 ... r_t``.  The optimizer
minimizes ``sum_t rho_t`` over ordered factorizations with at most ``depth``
ranks, every rank in ``[2, r_max]`` and ``base <= q_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

from .errors import Infeasible, ValidationError


@dataclass(frozen=True)
class ScheduleQuery:
    n: int
    depth: int
    r_max: int
    q_max: int
    trim: bool = False

    def __post_init__(self):
        for name in ("n", "depth", "r_max", "q_max"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class RankSchedule:
    """Ranks ``r_1..r_k`` and the leaf size ``base`` for ``n`` points.

    ``trimmed`` counts points that had to be dropped from the original input
    to make ``n`` factorizable.
    """

    ranks: tuple
    base: int
    n: int = 0
    trimmed: int = 0
    effective: tuple = field(init=False)

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "base", int(self.base))
        eff = []
        rho = 1
        for r in ranks:
            rho *= r
            eff.append(rho)
        object.__setattr__(self, "effective", tuple(eff))
        if self.n == 0:
            object.__setattr__(self, "n", (eff[-1] if eff else 1) * self.base)
        if (eff[-1] if eff else 1) * self.base != self.n:
            raise ValidationError(
                f"ranks {list(ranks)} and base {self.base} do not multiply to n = {self.n}")

    @property
    def depth(self) -> int:
        return len(self.ranks)

    @property
    def objective(self) -> int:
        """``sum_t rho_t``, the quantity the optimizer minimizes."""
        return sum(self.effective)

    @property
    def lrot_calls(self) -> int:
        """Number of low-rank solves: ``1 + rho_1 + ... + rho_{k-1}``."""
        return 1 + sum(self.effective[:-1])

    def as_list(self) -> list:
        return [*self.ranks, self.base]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ranks": list(self.ranks),
            "base": self.base,
            "schedule": self.as_list(),
            "effective": list(self.effective),
            "objective": self.objective,
            "lrot_calls": self.lrot_calls,
            "trimmed": self.trimmed,
        }


def divisors(n: int) -> list:
    small, large = [], []
    for k in range(1, math.isqrt(n) + 1):
        if n % k == 0:
            small.append(k)
            if k != n // k:
                large.append(n // k)
    return small + large[::-1]


@lru_cache(maxsize=1 << 18)
def _best(m: int, k: int, r_max: int):
    """Lexicographically smallest ``(objective, ranks)`` for ``m``, or None.

    ``ranks`` is an ordered factorization of ``m`` into at most ``k``
    factors in ``[2, r_max]``; the objective is the sum of prefix products.
    """
    if m == 1:
        return (0, ())
    if k == 0:
        return None
    best = None
    for r in divisors(m):
        if r < 2:
            continue
        if r > r_max:
            break
        sub = _best(m // r, k - 1, r_max)
        if sub is None:
            continue
        cand = (r + r * sub[0], (r,) + sub[1])
        if best is None or cand < best:
            best = cand
    return best


def _solve(n: int, depth: int, r_max: int, q_max: int):
    best = None
    for q in divisors(n):
        if q > q_max or q == n:
            continue
        sub = _best(n // q, depth, r_max)
        if sub is None:
            continue
        key = (sub[0], -q, sub[1])
        if best is None or key < best:
            best = key
    if best is None:
        return None
    return RankSchedule(best[2], -best[1], n)


def optimal_schedule(query: ScheduleQuery) -> RankSchedule:
    """Cheapest schedule for ``query``.

    Ties prefer the larger base and then the lexicographically smallest rank
    list.  With ``trim`` set, an infeasible ``n`` is reduced to the largest
    feasible ``n' < n`` and the difference is reported in ``trimmed``.

    Raises
    ------
    Infeasible
        No schedule exists and ``trim`` is off.

    Examples
    --------
    >>> optimal_schedule(ScheduleQuery(1024, 2, 16, 1024)).as_list()
    [2, 512]
    """
    found = _solve(query.n, query.depth, query.r_max, query.q_max)
    if found is not None:
        return found
    if query.trim:
        for n2 in range(query.n - 1, 1, -1):
            found = _solve(n2, query.depth, query.r_max, query.q_max)
            if found is not None:
                return RankSchedule(found.ranks, found.base, n2, query.n - n2)
    raise Infeasible(f"no schedule for n = {query.n} within the given caps",
                     _binding_constraint(query))


def _binding_constraint(query: ScheduleQuery) -> str:
    n = query.n
    if n < 2:
        return "n"
    deep = max(1, n.bit_length())
    if _solve(n, deep, query.r_max, query.q_max) is not None:
        return "depth"
    if _solve(n, query.depth, n, query.q_max) is not None:
        return "r_max"
    if _solve(n, query.depth, query.r_max, n) is not None:
        return "q_max"
    return "r_max"


class ScheduleCheck(NamedTuple):
    ok: bool
    diagnostics: str


def validate_schedule(ranks, base: int, n: int, r_max: int | None = None,
                      q_max: int | None = None) -> ScheduleCheck:
    """Check that ``prod(ranks) * base == n`` and that the caps hold.

    The diagnostics string names the first violation, or is ``"ok"``.
    """
    ranks = list(ranks)
    if base < 1:
        return ScheduleCheck(False, f"base {base} < 1")
    for t, r in enumerate(ranks):
        if r < 2:
            return ScheduleCheck(False, f"rank {r} at level {t + 1} is < 2")
        if r_max is not None and r > r_max:
            return ScheduleCheck(False, f"rank {r} at level {t + 1} exceeds r_max {r_max}")
    if q_max is not None and base > q_max:
        return ScheduleCheck(False, f"base {base} exceeds q_max {q_max}")
    product = math.prod(ranks) * base
    if product != n:
        return ScheduleCheck(False, f"product {product} != n {n}")
    return ScheduleCheck(True, "ok")
