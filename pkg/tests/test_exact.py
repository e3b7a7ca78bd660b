from itertools import combinations, permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiref.errors import NumericalError, ShapeError, TooLargeError, ValidationError
from hiref.exact import brute_force_lrot, hungarian, rank2_objective


def enumerate_assignment(c):
    """Minimum of sum C[i, p_i] over every permutation, and its argmin."""
    n = c.shape[0]
    best, arg = np.inf, None
    for p in permutations(range(n)):
        v = c[np.arange(n), p].sum()
        if v < best:
            best, arg = v, p
    return best / n, np.array(arg)


def enumerate_bipartitions(c):
    """Rank-2 objective minimized by explicit loops over both label sets."""
    n = c.shape[0]
    best = np.inf
    for s in combinations(range(n), n // 2):
        sl = np.ones(n, dtype=int)
        sl[list(s)] = 0
        for t in combinations(range(n), n // 2):
            tl = np.ones(n, dtype=int)
            tl[list(t)] = 0
            total = sum(c[i, j] for i in range(n) for j in range(n) if sl[i] == tl[j])
            best = min(best, 2.0 * total / n**2)
    return best


class TestHungarian:
    def test_diagonal(self):
        res = hungarian([[0.0, 1.0], [1.0, 0.0]])
        assert list(res.perm) == [0, 1] and res.cost == 0.0

    def test_antidiagonal(self):
        res = hungarian([[1.0, 0.0], [0.0, 1.0]])
        assert list(res.perm) == [1, 0] and res.cost == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_enumeration_n7(self, seed):
        c = np.random.default_rng(seed).random((7, 7))
        best, _ = enumerate_assignment(c)
        assert hungarian(c).cost == pytest.approx(best, abs=1e-12)

    def test_non_square(self):
        with pytest.raises(ShapeError):
            hungarian(np.zeros((2, 3)))

    def test_non_finite(self):
        with pytest.raises(NumericalError):
            hungarian([[0.0, np.nan], [1.0, 0.0]])

    def test_ties_lowest_index(self):
        assert list(hungarian(np.zeros((4, 4))).perm) == [0, 1, 2, 3]

    def test_single(self):
        res = hungarian([[3.0]])
        assert list(res.perm) == [0] and res.cost == 3.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 2**31))
    def test_beats_random_permutations(self, n, seed):
        rng = np.random.default_rng(seed)
        c = rng.random((n, n))
        res = hungarian(c)
        assert sorted(res.perm) == list(range(n))
        for _ in range(1000 if n <= 8 else 100):
            p = rng.permutation(n)
            assert res.cost <= c[np.arange(n), p].sum() / n + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 20), st.integers(0, 2**31), st.floats(-5, 5), st.floats(-5, 5))
    def test_shift_invariance(self, n, seed, row_shift, col_shift):
        rng = np.random.default_rng(seed)
        c = rng.random((n, n)) + 10.0
        i, j = rng.integers(n, size=2)
        shifted = c.copy()
        shifted[i] += row_shift
        shifted[:, j] += col_shift
        a, b = hungarian(c), hungarian(shifted)
        # the optimal value shifts by (row + col) / n; argmin sets coincide
        assert b.cost == pytest.approx(a.cost + (row_shift + col_shift) / n, abs=1e-9)
        assert shifted[np.arange(n), a.perm].sum() / n == pytest.approx(b.cost, abs=1e-9)

    def test_plan_in_transport_polytope(self):
        c = np.random.default_rng(1).random((9, 9))
        p = hungarian(c).plan()
        np.testing.assert_allclose(p.sum(axis=0), np.full(9, 1 / 9))
        np.testing.assert_allclose(p.sum(axis=1), np.full(9, 1 / 9))
        assert np.count_nonzero(p) == 9


class TestBruteForceLrot:
    def test_separable(self):
        x = np.array([0.0, 0.1, 10.0, 10.1])
        res = brute_force_lrot(np.abs(x[:, None] - x[None, :]))
        assert list(res.source_labels) == [0, 0, 1, 1]
        assert list(res.target_labels) == [0, 0, 1, 1]

    def test_constant_cost(self):
        assert brute_force_lrot(np.ones((4, 4))).objective == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_loop_enumeration(self, seed):
        c = np.random.default_rng(seed).random((6, 6))
        res = brute_force_lrot(c)
        assert res.objective == pytest.approx(enumerate_bipartitions(c), abs=1e-12)
        assert rank2_objective(c, res.source_labels, res.target_labels) == \
            pytest.approx(res.objective, abs=1e-12)

    def test_n8_is_minimum(self):
        c = np.random.default_rng(11).random((8, 8))
        res = brute_force_lrot(c)
        rng = np.random.default_rng(0)
        for _ in range(500):
            sl = rng.permutation(np.repeat([0, 1], 4))
            tl = rng.permutation(np.repeat([0, 1], 4))
            assert res.objective <= rank2_objective(c, sl, tl) + 1e-12

    def test_labels_balanced(self):
        res = brute_force_lrot(np.random.default_rng(3).random((10, 10)))
        assert res.source_labels.sum() == 5 and res.target_labels.sum() == 5

    def test_errors(self):
        with pytest.raises(TooLargeError):
            brute_force_lrot(np.zeros((14, 14)))
        with pytest.raises(ValidationError):
            brute_force_lrot(np.zeros((5, 5)))
        with pytest.raises(ShapeError):
            brute_force_lrot(np.zeros((4, 6)))
        with pytest.raises(ValidationError):
            brute_force_lrot(np.zeros((6, 6)), r=3)
