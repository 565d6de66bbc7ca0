import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import BENCHMARK_A, random_params
from tailmix.estimate import (
    FitConfig,
    default_grid,
    fit_known_r,
    generate_grid,
    kmeans_start,
    ls_loss,
    ls_loss_parts,
    penalty,
    pnpls_fit,
    standardize_rows,
)
from tailmix.model import (
    HUSLER_REISS,
    LOGISTIC,
    MixtureParams,
    lex_order_columns,
    stdf_mixture_grid,
)
from tailmix.optimize import OptimOptions
from tailmix.simulate import SimSpec, sample_mixture

FAST_OPT = OptimOptions(max_evals=1500, tol_f=1e-9)


def small_grid(d):
    return generate_grid(d, (1 / 2, 1.0), {2})


class TestPenalty:
    def test_p_one_collapses_to_row_sums(self):
        assert_allclose(penalty(BENCHMARK_A, 1.0), 4.0, atol=1e-12)

    def test_single_row_hand_value(self):
        assert_allclose(penalty(np.array([[0.5, 0.5]]), 0.5), 2.0, atol=1e-12)

    def test_one_hot_rows_attain_lower_bound(self):
        A = np.eye(4)[:, :3]
        A[3, 0] = 1.0
        for p in (0.2, 0.5, 1.0):
            assert_allclose(penalty(A, p), 4.0, atol=1e-12)

    def test_column_permutation_invariant(self):
        rng = np.random.default_rng(0)
        A = rng.uniform(size=(4, 3))
        perm = A[:, [2, 0, 1]]
        for p in (0.3, 0.7, 1.0):
            assert_allclose(penalty(A, p), penalty(perm, p), atol=1e-12)

    def test_bounds_for_standardized_matrices(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            d, r = rng.integers(2, 6), rng.integers(1, 5)
            A = random_params(rng, d, r, LOGISTIC).A
            p = float(rng.uniform(0.2, 1.0))
            val = penalty(A, p)
            assert d - 1e-9 <= val <= d * r ** (1.0 / p - 1.0) + 1e-9

    def test_rejects_bad_exponent(self):
        with pytest.raises(ValueError):
            penalty(BENCHMARK_A, 0.0)
        with pytest.raises(ValueError):
            penalty(BENCHMARK_A, 1.2)


class TestLsLoss:
    def setup_method(self):
        self.theta = MixtureParams(LOGISTIC, BENCHMARK_A, alpha=0.25)
        self.grid = default_grid(4, LOGISTIC)
        self.ell = stdf_mixture_grid(self.grid, self.theta)

    def test_zero_at_reproducing_parameters(self):
        assert ls_loss(self.theta, self.ell, self.grid, p=0.4, lam=0.0) == 0.0

    def test_lambda_decomposition_exact(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            theta = random_params(rng, 4, 3, LOGISTIC)
            lam = float(rng.uniform(0.0, 2.0))
            p = float(rng.uniform(0.2, 1.0))
            with_pen = ls_loss(theta, self.ell, self.grid, p=p, lam=lam)
            without = ls_loss(theta, self.ell, self.grid, p=p, lam=0.0)
            assert with_pen == without + lam * penalty(theta.A, p)

    def test_two_point_toy_instance(self):
        # single logistic factor on two points, residuals summed by hand
        theta = MixtureParams(LOGISTIC, np.ones((2, 1)), alpha=0.5)
        grid = np.array([[1.0, 1.0], [0.5, 1.0]])
        ell_hat = np.array([1.2, 1.0])
        model = [np.sqrt(2.0), np.sqrt(0.25 + 1.0)]
        want = sum((m - e) ** 2 for m, e in zip(model, ell_hat))
        got = ls_loss(theta, ell_hat, grid, p=0.4, lam=0.0)
        assert_allclose(got, want, rtol=1e-12)

    def test_parts_sum_to_loss(self):
        data, pen = ls_loss_parts(self.theta, self.ell, self.grid, p=0.4)
        assert_allclose(data + 0.7 * pen,
                        ls_loss(self.theta, self.ell, self.grid, p=0.4, lam=0.7))


class TestStandardizeRows:
    def test_hand_value(self):
        out = standardize_rows(np.array([[0.2, 0.6]]))
        assert_allclose(out.matrix, [[0.25, 0.75]])
        assert out.repaired_rows == []

    def test_idempotent_on_standardized(self):
        out = standardize_rows(BENCHMARK_A)
        assert_allclose(out.matrix, BENCHMARK_A)

    def test_degenerate_row_repaired_to_largest(self):
        A = np.array([[1e-6, 3e-6], [0.4, 0.6]])
        out = standardize_rows(A, zero_tol=1e-4)
        assert_allclose(out.matrix[0], [0.0, 1.0])
        assert out.repaired_rows == [0]

    def test_all_zero_row_tie_goes_to_first_column(self):
        out = standardize_rows(np.array([[0.0, 0.0]]), zero_tol=1e-4)
        assert_allclose(out.matrix, [[1.0, 0.0]])

    def test_unit_row_sums_always(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            A = rng.uniform(0.0, 1.0, size=(5, 3)) * (rng.random((5, 3)) < 0.7)
            out = standardize_rows(A)
            assert_allclose(out.matrix.sum(axis=1), np.ones(5), atol=1e-12)


class TestPnplsFit:
    def test_fixed_point_at_truth(self):
        theta = MixtureParams(LOGISTIC, BENCHMARK_A, alpha=0.25)
        grid = default_grid(4, LOGISTIC)
        ell = stdf_mixture_grid(grid, theta)
        config = FitConfig(grid=grid, tail=60, lam=0.0, optim=FAST_OPT)
        fitted = pnpls_fit(ell, grid, theta, config)
        loss = ls_loss(fitted, ell, grid, p=0.4, lam=0.0)
        assert loss <= 1e-10

    def test_recovers_alpha_in_two_dimensions(self):
        truth = MixtureParams(LOGISTIC, np.ones((2, 1)), alpha=0.5)
        grid = generate_grid(2, (1 / 4, 1 / 2, 3 / 4, 1.0), {2})
        ell = stdf_mixture_grid(grid, truth)
        config = FitConfig(grid=grid, tail=10, lam=0.0,
                           optim=OptimOptions(tol_grad=1e-12, tol_f=1e-14))
        start = MixtureParams(LOGISTIC, np.ones((2, 1)), alpha=0.3)
        fitted = pnpls_fit(ell, grid, start, config)
        std = standardize_rows(fitted.A).matrix
        assert_allclose(std, np.ones((2, 1)))
        assert abs(fitted.alpha - 0.5) < 1e-3

    def test_infeasible_start_rejected_at_type_boundary(self):
        with pytest.raises(ValueError):
            MixtureParams(LOGISTIC, np.ones((2, 1)), alpha=1.5)

    def test_hr_fixed_point(self):
        g = np.ones((3, 3)) - np.eye(3)
        truth = MixtureParams(HUSLER_REISS, np.eye(3), gamma=g)
        grid = generate_grid(3, (1 / 2, 1.0), {2})
        ell = stdf_mixture_grid(grid, truth)
        config = FitConfig(grid=grid, tail=10, lam=0.0, family=HUSLER_REISS,
                           optim=FAST_OPT)
        fitted = pnpls_fit(ell, grid, truth, config)
        assert ls_loss(fitted, ell, grid, p=0.4, lam=0.0) <= 1e-10


class TestFitKnownR:
    def setup_method(self):
        self.theta = MixtureParams(LOGISTIC, BENCHMARK_A, alpha=0.25)
        self.sample = sample_mixture(SimSpec(self.theta, n=800,
                                             noise_sigma=3.0, seed=17))
        self.grid = default_grid(4, LOGISTIC)

    def test_r_one_forces_all_ones_column(self):
        config = FitConfig(grid=self.grid, tail=0.05, lam=0.0, optim=FAST_OPT,
                           max_alt_iters=1)
        report = fit_known_r(self.sample, 1, config)
        assert_allclose(report.theta.A, np.ones((4, 1)))
        assert report.signatures == [frozenset({0, 1, 2, 3})]

    def test_output_invariants(self):
        config = FitConfig(grid=self.grid, tail=0.05, lam=0.05, optim=FAST_OPT,
                           max_alt_iters=2)
        report = fit_known_r(self.sample, 3, config)
        A = report.theta.A
        assert_allclose(A.sum(axis=1), np.ones(4), atol=1e-9)
        assert np.all((A == 0.0) | (A > config.zero_tol))
        assert_allclose(A, lex_order_columns(A))
        assert report.k == 40

    def test_z_stage_never_increases_loss(self):
        config = FitConfig(grid=self.grid, tail=0.05, lam=0.02, optim=FAST_OPT,
                           max_alt_iters=3)
        report = fit_known_r(self.sample, 3, config)
        stages = dict(report.loss_trace)
        for it in range(1, report.n_alternations + 1):
            if f"alt{it}_Z" in stages:
                assert stages[f"alt{it}_Z"] <= stages[f"alt{it}_std"] + 1e-12

    def test_unpenalized_matches_lambda_zero(self):
        config0 = FitConfig(grid=self.grid, tail=0.05, lam=0.0, optim=FAST_OPT,
                            max_alt_iters=1)
        report = fit_known_r(self.sample, 2, config0)
        assert report.lam == 0.0
        assert report.final_loss == report.final_data_term

    def test_dimension_mismatch_rejected(self):
        config = FitConfig(grid=default_grid(3, LOGISTIC), tail=0.05)
        with pytest.raises(ValueError):
            fit_known_r(self.sample, 2, config)

    def test_report_serializes(self):
        import json

        config = FitConfig(grid=self.grid, tail=0.05, lam=0.01, optim=FAST_OPT,
                           max_alt_iters=1)
        report = fit_known_r(self.sample, 2, config)
        blob = json.dumps(report.to_dict())
        assert "signatures" in blob


class TestKmeansStart:
    def test_single_cluster_gives_all_ones(self):
        rng = np.random.default_rng(4)
        sample = rng.pareto(1.0, size=(200, 3))
        assert_allclose(kmeans_start(sample, 1), np.ones((3, 1)))

    def test_axis_aligned_clusters_concentrate_columns(self):
        rng = np.random.default_rng(5)
        n = 400
        sample = rng.uniform(0.5, 1.0, size=(n, 2))
        # half the tail rows huge in margin 0, half huge in margin 1
        sample[:60, 0] = 1e3 + rng.uniform(0, 10, 60)
        sample[60:120, 1] = 1e3 + rng.uniform(0, 10, 60)
        A0 = kmeans_start(sample, 2, seed=0)
        assert A0.shape == (2, 2)
        assert_allclose(A0.sum(axis=1), np.ones(2), atol=1e-12)
        assert A0.max() > 0.9

    def test_uniform_fallback_when_tail_too_small(self):
        rng = np.random.default_rng(6)
        sample = rng.normal(size=(20, 3))  # top 10% = 2 rows < t = 4
        with pytest.warns(UserWarning):
            A0 = kmeans_start(sample, 4)
        assert_allclose(A0, np.full((3, 4), 0.25))

    def test_valid_start_for_fitting(self):
        rng = np.random.default_rng(7)
        sample = rng.pareto(1.0, size=(500, 4))
        A0 = kmeans_start(sample, 3, seed=1)
        assert np.all(A0 >= 0.0) and np.all(A0 <= 1.0)
        assert_allclose(A0.sum(axis=1), np.ones(4), atol=1e-12)


class TestGenerateGrid:
    def test_benchmark_recipe_count(self):
        grid = generate_grid(4, (1 / 4, 1 / 3, 1 / 2, 3 / 4, 1.0), {2, 3})
        assert grid.shape == (650, 4)

    def test_single_point(self):
        grid = generate_grid(2, (1.0,), {2})
        assert_allclose(grid, [[1.0, 1.0]])

    def test_five_dims_count(self):
        grid = generate_grid(5, (1 / 4, 1 / 3, 1 / 2, 3 / 4, 1.0), {2, 3})
        assert grid.shape == (1500, 5)

    def test_deterministic_order(self):
        g1 = generate_grid(3, (0.5, 1.0), {1, 2})
        g2 = generate_grid(3, (0.5, 1.0), {1, 2})
        assert np.array_equal(g1, g2)
        # supports of size 1 come first, in lexicographic support order
        assert_allclose(g1[0], [0.5, 0.0, 0.0])
        assert_allclose(g1[1], [1.0, 0.0, 0.0])

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            generate_grid(3, (0.5, 0.5), {2})
        with pytest.raises(ValueError):
            generate_grid(3, (0.5,), {4})
        with pytest.raises(ValueError):
            generate_grid(3, (-1.0, 0.5), {2})

    def test_hr_default_grid_is_pairs_only(self):
        grid = default_grid(4, HUSLER_REISS)
        assert grid.shape == (7 ** 2 * 6, 4)
        assert np.all((grid > 0).sum(axis=1) == 2)
