import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiref.errors import Infeasible, ValidationError
from hiref.schedule import (
    RankSchedule,
    ScheduleQuery,
    divisors,
    optimal_schedule,
    validate_schedule,
)
from oracles import brute_schedule_objective, ordered_factorizations, prefix_sum


def test_imagenet_shape():
    s = optimal_schedule(ScheduleQuery(640500, 3, 64, 2048))
    assert list(s.ranks) == [7, 50] and s.base == 1830
    assert s.as_list() == [7, 50, 1830]


def test_synthetic_shape():
    s = optimal_schedule(ScheduleQuery(1024, 2, 16, 1024))
    assert list(s.ranks) == [2] and s.base == 512


def test_unique_under_caps():
    s = optimal_schedule(ScheduleQuery(16, 4, 2, 1))
    assert list(s.ranks) == [2, 2, 2, 2] and s.base == 1


def test_360_matches_enumeration():
    s = optimal_schedule(ScheduleQuery(360, 3, 10, 20))
    assert s.objective == brute_schedule_objective(360, 3, 10, 20)
    assert validate_schedule(s.ranks, s.base, 360, 10, 20).ok


def test_embryo_trim():
    # 113350 = 2 * 5^2 * 2267 has a prime factor above every cap
    s = optimal_schedule(ScheduleQuery(113350, 3, 128, 1024, trim=True))
    assert s.as_list() == [2, 86, 659] and s.trimmed == 2 and s.n == 113348


def test_ties_prefer_larger_base():
    # 8 = 2 * 4 = 4 * 2 with r_max 4, q_max 4: objective 2 for [2] base 4
    s = optimal_schedule(ScheduleQuery(8, 2, 4, 4))
    assert list(s.ranks) == [2] and s.base == 4


def test_lrot_calls():
    s = RankSchedule((7, 50), 1830)
    assert s.n == 640500
    assert s.effective == (7, 350)
    assert s.lrot_calls == 1 + 7
    assert s.objective == 357


def test_to_dict_fields():
    d = optimal_schedule(ScheduleQuery(1024, 2, 16, 1024)).to_dict()
    assert d["ranks"] == [2] and d["base"] == 512 and d["lrot_calls"] == 1
    assert d["trimmed"] == 0


class TestInfeasible:
    def test_prime(self):
        with pytest.raises(Infeasible) as exc:
            optimal_schedule(ScheduleQuery(97, 3, 16, 16))
        assert exc.value.constraint in ("r_max", "q_max")

    def test_depth_binding(self):
        with pytest.raises(Infeasible) as exc:
            optimal_schedule(ScheduleQuery(64, 2, 2, 1))
        assert exc.value.constraint == "depth"

    def test_n_one(self):
        with pytest.raises(Infeasible):
            optimal_schedule(ScheduleQuery(1, 2, 2, 1))

    def test_trim_recovers(self):
        s = optimal_schedule(ScheduleQuery(97, 3, 16, 16, trim=True))
        assert s.n + s.trimmed == 97 and validate_schedule(s.ranks, s.base, s.n, 16, 16).ok

    @pytest.mark.parametrize("bad", [0, -1, 1.5, True])
    def test_query_validation(self, bad):
        with pytest.raises(ValidationError):
            ScheduleQuery(bad, 2, 2, 2)


class TestValidate:
    def test_true(self):
        assert validate_schedule([2, 512], 1, 1024).ok

    def test_embryo_mismatch(self):
        check = validate_schedule([2, 86], 659, 113350)
        assert not check.ok and "113348" in check.diagnostics

    def test_three_three_two(self):
        assert validate_schedule([3, 3], 2, 18).ok

    def test_caps(self):
        assert "r_max" in validate_schedule([4], 2, 8, r_max=3).diagnostics
        assert "q_max" in validate_schedule([2], 4, 8, q_max=3).diagnostics
        assert not validate_schedule([1, 8], 1, 8).ok


def test_divisors():
    assert divisors(12) == [1, 2, 3, 4, 6, 12]
    assert divisors(1) == [1]


def test_factorization_oracle():
    assert sorted(ordered_factorizations(12, 3)) == sorted(
        [(12,), (2, 6), (6, 2), (3, 4), (4, 3), (2, 2, 3), (2, 3, 2), (3, 2, 2)])
    assert prefix_sum((2, 3)) == 2 + 6


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 3000), st.integers(1, 4), st.integers(2, 32), st.integers(1, 64))
def test_dp_matches_brute_force(n, depth, r_max, q_max):
    expected = brute_schedule_objective(n, depth, r_max, q_max)
    query = ScheduleQuery(n, depth, r_max, q_max)
    if expected is None:
        with pytest.raises(Infeasible):
            optimal_schedule(query)
        return
    s = optimal_schedule(query)
    assert s.objective == expected
    assert validate_schedule(s.ranks, s.base, n, r_max, q_max).ok
    assert 1 <= s.depth <= depth


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 400), st.integers(1, 3), st.integers(2, 8), st.integers(1, 8))
def test_trim_minimality(n, depth, r_max, q_max):
    s = optimal_schedule(ScheduleQuery(n, depth, r_max, q_max, trim=True))
    assert s.n + s.trimmed == n
    for n2 in range(s.n + 1, n + 1):
        assert brute_schedule_objective(n2, depth, r_max, q_max) is None
