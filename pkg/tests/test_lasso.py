import numpy as np
import pytest

from parkcast.lasso import (
    DegenerateGridError,
    LassoProblem,
    LassoSettings,
    coordinate_descent,
    fit_path_bic,
    kkt_residuals,
    lambda_grid,
    objective_value,
    soft_threshold,
    weighted_bic,
)


def random_problem(rng, m=50, p=8, weighted=True, nonneg=False):
    X = rng.standard_normal((m, p))
    y = rng.standard_normal(m)
    w = rng.uniform(0.5, 2.0, m) if weighted else None
    return LassoProblem(y, X, weights=w, nonnegative=nonneg)


def weighted_ls(problem):
    X, y, w = problem.design, problem.response, problem.weights
    return np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * y))


class TestSoftThreshold:
    def test_values(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(-3.0, 1.0) == -2.0

    def test_zero_gap_is_identity(self):
        z = np.linspace(-2, 2, 11)
        assert np.array_equal(soft_threshold(z, 0.0), z)


class TestLambdaGrid:
    def test_count_two(self):
        prob = random_problem(np.random.default_rng(0))
        grid = lambda_grid(prob, count=2, ratio=0.25)
        assert grid.size == 2
        assert grid[1] == pytest.approx(grid[0] * 0.25)

    def test_single_column_stationarity(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(60)
        w = rng.uniform(0.5, 2.0, 60)
        prob = LassoProblem(x.copy(), x[:, None], weights=w)
        grid = lambda_grid(prob, count=3, ratio=0.1)
        assert grid[0] == pytest.approx(2.0 * abs(np.dot(w * x, x)))
        # at lambda >= lambda_max the coefficient is exactly zero
        assert coordinate_descent(prob, grid[0] * (1 + 1e-12))[0] == 0.0

    def test_weight_scaling_linearity(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((40, 5))
        y = rng.standard_normal(40)
        g1 = lambda_grid(LassoProblem(y, X), count=4, ratio=0.5)
        g2 = lambda_grid(LassoProblem(y, X, weights=np.full(40, 3.0)),
                         count=4, ratio=0.5)
        assert g2[0] == pytest.approx(3.0 * g1[0])

    def test_zero_response_degenerate(self):
        prob = LassoProblem(np.zeros(20), np.random.default_rng(3).standard_normal((20, 4)))
        with pytest.raises(DegenerateGridError):
            lambda_grid(prob)

    def test_unpenalized_columns_residualized(self):
        # response fully explained by the unpenalized constant
        X = np.column_stack([np.ones(30), np.random.default_rng(4).standard_normal(30)])
        prob = LassoProblem(np.full(30, 7.0), X,
                            penalize_mask=np.array([False, True]))
        with pytest.raises(DegenerateGridError):
            lambda_grid(prob)


class TestCoordinateDescent:
    def test_lam0_matches_normal_equations(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            prob = random_problem(rng)
            b = coordinate_descent(prob, 0.0)
            assert np.abs(b - weighted_ls(prob)).max() < 1e-6

    def test_one_dim_closed_form(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(40)
        y = 0.8 * x + 0.1 * rng.standard_normal(40)
        w = rng.uniform(0.5, 2.0, 40)
        lam = 2.5
        prob = LassoProblem(y, x[:, None], weights=w)
        b = coordinate_descent(prob, lam)[0]
        z = np.dot(w * x, y)
        expect = np.sign(z) * max(abs(z) - lam / 2.0, 0.0) / np.dot(w * x, x)
        assert b == pytest.approx(expect, abs=1e-10)

    def test_one_dim_brute_force(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal(30)
        y = -0.6 * x + 0.2 * rng.standard_normal(30)
        w = rng.uniform(0.5, 2.0, 30)
        lam = 1.0
        prob = LassoProblem(y, x[:, None], weights=w)
        b = coordinate_descent(prob, lam)[0]
        grid = np.linspace(-2.0, 2.0, 400_001)
        resid = y[:, None] - x[:, None] * grid[None, :]
        obj = (w[:, None] * resid * resid).sum(axis=0) + lam * np.abs(grid)
        assert abs(grid[np.argmin(obj)] - b) < 1e-4

    def test_nonnegative_clamps_exactly(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(40)
        y = -x + 0.01 * rng.standard_normal(40)
        prob = LassoProblem(y, x[:, None], nonnegative=True)
        b = coordinate_descent(prob, 0.5)
        assert b[0] == 0.0 and not np.signbit(b[0])

    def test_warm_start_matches_cold(self):
        rng = np.random.default_rng(14)
        prob = random_problem(rng, m=80, p=10)
        lam = lambda_grid(prob, 10, 0.01)[4]
        cold = coordinate_descent(prob, lam)
        warm = coordinate_descent(prob, lam, warm_start=cold + rng.normal(0, 0.1, 10))
        assert np.abs(cold - warm).max() < 1e-8

    def test_duplicated_rows_leave_ls_solution(self):
        rng = np.random.default_rng(15)
        prob = random_problem(rng, m=40, p=5)
        X2 = np.vstack([prob.design, prob.design])
        y2 = np.concatenate([prob.response, prob.response])
        w2 = np.concatenate([prob.weights, prob.weights])
        b1 = coordinate_descent(prob, 0.0)
        b2 = coordinate_descent(LassoProblem(y2, X2, weights=w2), 0.0)
        assert np.abs(b1 - b2).max() < 1e-7

    def test_duplicate_columns_excluded(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal(30)
        X = np.column_stack([x, x, rng.standard_normal(30)])
        b = coordinate_descent(LassoProblem(x.copy(), X), 0.1)
        assert b[1] == 0.0  # later duplicate carries no weight


class TestWeightedBic:
    def test_zero_coefficients(self):
        rng = np.random.default_rng(20)
        y = rng.standard_normal(100)
        prob = LassoProblem(y, rng.standard_normal((100, 3)))
        bic, flag = weighted_bic(prob, np.zeros(3))
        assert bic == pytest.approx(100 * np.log(np.dot(y, y) / 100))
        assert not flag

    def test_df_counts_nonzeros_only(self):
        rng = np.random.default_rng(21)
        y = rng.standard_normal(50)
        X = rng.standard_normal((50, 4))
        prob = LassoProblem(y, X)
        b = np.array([0.0, 0.5, 0.0, -0.2])
        bic, _ = weighted_bic(prob, b)
        r = y - X @ b
        assert bic == pytest.approx(50 * np.log(np.dot(r, r) / 50) + 2 * np.log(50))

    def test_perfect_fit_flagged(self):
        x = np.arange(1.0, 11.0)
        prob = LassoProblem(2.0 * x, x[:, None])
        bic, flag = weighted_bic(prob, np.array([2.0]))
        assert flag and bic == -np.inf


class TestFitPathBic:
    def test_pure_noise_selects_mostly_nothing(self):
        rng = np.random.default_rng(30)
        empty = 0
        kept = 0
        for _ in range(10):
            prob = LassoProblem(rng.standard_normal(200),
                                rng.standard_normal((200, 6)))
            fit = fit_path_bic(prob, LassoSettings(grid_count=40))
            nz = np.count_nonzero(fit.coefficients)
            empty += nz == 0
            kept += nz
        # BIC keeps noise out of almost every fit (60 candidate columns here)
        assert empty >= 8
        assert kept <= 6

    def test_strong_signal_recovered(self):
        rng = np.random.default_rng(31)
        X = rng.standard_normal((300, 10))
        beta = np.zeros(10)
        beta[[2, 7]] = (1.5, -2.0)
        y = X @ beta + 0.3 * rng.standard_normal(300)
        fit = fit_path_bic(LassoProblem(y, X))
        support = set(np.flatnonzero(fit.coefficients))
        assert {2, 7} <= support

    def test_kkt_on_selected_solution(self):
        rng = np.random.default_rng(32)
        prob = random_problem(rng, m=120, p=12)
        fit = fit_path_bic(prob, LassoSettings(grid_count=30))
        res = kkt_residuals(prob, fit.coefficients, fit.selected_lambda)
        assert res.max() <= 1e-6

    def test_objective_not_above_zero_start(self):
        rng = np.random.default_rng(33)
        prob = random_problem(rng, m=60, p=6)
        fit = fit_path_bic(prob)
        start = objective_value(prob, np.zeros(6), fit.selected_lambda)
        assert fit.objective <= start + 1e-9

    def test_tie_break_prefers_larger_lambda(self):
        rng = np.random.default_rng(34)
        prob = LassoProblem(rng.standard_normal(50), rng.standard_normal((50, 3)))
        fit = fit_path_bic(prob, LassoSettings(grid_count=25))
        ties = np.flatnonzero(fit.bic_path == fit.bic_path[fit.selected_index])
        assert fit.selected_index == ties[0]


class TestValidation:
    def test_bad_weights_rejected(self):
        X = np.ones((3, 1))
        with pytest.raises(ValueError):
            LassoProblem(np.ones(3), X, weights=np.array([1.0, 0.0, 1.0]))
        with pytest.raises(ValueError):
            LassoProblem(np.ones(3), X, weights=np.array([1.0, np.inf, 1.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            LassoProblem(np.ones(3), np.ones((4, 2)))
