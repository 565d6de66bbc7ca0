import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tailmix.empirical import (
    chi_pseudo_distance,
    empirical_chi,
    empirical_stdf,
    empirical_stdf_grid,
    ranks,
    resolve_tail_count,
    unit_pareto_transform,
)

COMONOTONE = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]])
COUNTERMONOTONE = np.array([[1.0, 40.0], [2.0, 30.0], [3.0, 20.0], [4.0, 10.0]])


def stdf_double_loop(sample, k, x):
    """Naive oracle: literal double loop over observations and margins."""
    r = ranks(sample)
    n, d = r.shape
    count = 0
    for i in range(n):
        if any(r[i, j] > n + 0.5 - k * x[j] for j in range(d)):
            count += 1
    return count / k


class TestRanks:
    def test_sorted_column(self):
        assert_allclose(ranks(np.array([[1.0], [2.0], [3.0], [4.0]])).ravel(),
                        [1, 2, 3, 4])

    def test_reversed_column(self):
        assert_allclose(ranks(np.array([[4.0], [3.0], [2.0], [1.0]])).ravel(),
                        [4, 3, 2, 1])

    def test_ties_broken_by_original_index(self):
        assert_allclose(ranks(np.array([[5.0], [5.0], [1.0]])).ravel(), [2, 3, 1])

    def test_columns_are_permutations(self):
        rng = np.random.default_rng(0)
        r = ranks(rng.normal(size=(30, 3)))
        for j in range(3):
            assert sorted(r[:, j]) == list(range(1, 31))

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            ranks(np.empty((0, 2)))
        with pytest.raises(ValueError):
            ranks(np.array([[np.nan, 1.0]]))


class TestResolveTailCount:
    def test_integer_passthrough(self):
        assert resolve_tail_count(10, 100) == 10

    def test_fraction(self):
        assert resolve_tail_count(0.02, 3000) == 60
        assert resolve_tail_count(0.999, 10) == 10

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            resolve_tail_count(0, 5)
        with pytest.raises(ValueError):
            resolve_tail_count(6, 5)
        with pytest.raises(ValueError):
            resolve_tail_count(1.5, 5)


class TestEmpiricalStdf:
    def test_comonotone_toy(self):
        assert empirical_stdf(COMONOTONE, 2, [1.0, 1.0]) == 1.0

    def test_countermonotone_toy(self):
        assert empirical_stdf(COUNTERMONOTONE, 2, [1.0, 1.0]) == 2.0

    def test_zero_point(self):
        assert empirical_stdf(COMONOTONE, 2, [0.0, 0.0]) == 0.0

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(3, 21))
            d = int(rng.integers(1, 4))
            sample = rng.normal(size=(n, d))
            k = int(rng.integers(1, n + 1))
            x = rng.uniform(0.0, 2.0, size=d)
            assert empirical_stdf(sample, k, x) == stdf_double_loop(sample, k, x)

    def test_monotone_in_each_coordinate(self):
        rng = np.random.default_rng(2)
        sample = rng.normal(size=(50, 3))
        r = ranks(sample)
        x = np.array([0.5, 1.0, 0.3])
        base = empirical_stdf_grid(r, 10, x)[0]
        for j in range(3):
            hi = x.copy()
            hi[j] += 0.7
            assert empirical_stdf_grid(r, 10, hi)[0] >= base

    def test_upper_bound_and_margin_value(self):
        rng = np.random.default_rng(3)
        sample = rng.normal(size=(40, 2))
        k = 8
        assert empirical_stdf(sample, k, [5.0, 5.0]) <= 40 / k
        e1 = empirical_stdf(sample, k, [1.0, 0.0])
        assert 0.0 <= e1 <= (k + 1) / k

    def test_invariant_under_increasing_margin_transform(self):
        rng = np.random.default_rng(4)
        sample = rng.normal(size=(60, 3))
        warped = sample.copy()
        warped[:, 1] = np.exp(warped[:, 1])
        r1, r2 = ranks(sample), ranks(warped)
        X = rng.uniform(0.0, 1.5, size=(20, 3))
        assert_allclose(empirical_stdf_grid(r1, 12, X),
                        empirical_stdf_grid(r2, 12, X))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=15), st.integers(min_value=0, max_value=10_000))
    def test_grid_matches_scalar_api(self, k, seed):
        rng = np.random.default_rng(seed)
        sample = rng.normal(size=(15, 2))
        X = rng.uniform(0.0, 2.0, size=(5, 2))
        grid = empirical_stdf_grid(ranks(sample), k, X)
        assert_allclose(grid, [empirical_stdf(sample, k, x) for x in X])


class TestEmpiricalChi:
    def test_comonotone(self):
        assert empirical_chi(COMONOTONE, 2, (0, 1)) == 1.0

    def test_countermonotone(self):
        assert empirical_chi(COUNTERMONOTONE, 2, (0, 1)) == 0.0

    def test_same_margin_rejected(self):
        with pytest.raises(ValueError):
            empirical_chi(COMONOTONE, 2, (1, 1))

    def test_symmetric_and_clamped(self):
        rng = np.random.default_rng(5)
        sample = rng.normal(size=(80, 3))
        c_st = empirical_chi(sample, 16, (0, 2))
        c_ts = empirical_chi(sample, 16, (2, 0))
        assert c_st == c_ts
        assert 0.0 <= c_st <= 1.0


class TestChiPseudoDistance:
    def test_hand_values(self):
        assert chi_pseudo_distance(1.0) == 0.0
        assert_allclose(chi_pseudo_distance(0.0), 1.0 / 6.0)
        assert_allclose(chi_pseudo_distance(0.5), 0.1)

    def test_strictly_decreasing(self):
        grid = np.linspace(0.0, 1.0, 101)
        vals = [chi_pseudo_distance(c) for c in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(ValueError):
            chi_pseudo_distance(1.2)


class TestUnitParetoTransform:
    def test_values_and_range(self):
        out = unit_pareto_transform(np.array([[1.0], [3.0], [2.0]]))
        assert_allclose(out.ravel(), [3 / 3, 3 / 1, 3 / 2])

    def test_heaviest_rank_gets_largest_value(self):
        rng = np.random.default_rng(6)
        sample = rng.normal(size=(25, 2))
        out = unit_pareto_transform(sample)
        for j in range(2):
            assert np.argmax(out[:, j]) == np.argmax(sample[:, j])
