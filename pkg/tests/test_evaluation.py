import numpy as np
import pytest
from conftest import tiny_config, two_turbine_truth

from parkcast.evaluation import (
    BacktestError,
    BacktestSpec,
    dmae,
    error_density,
    mae,
    mae_standard_deviation,
    run_backtest,
    sample_origins,
    write_report,
)
from parkcast.forecast import simulate_synthetic


class TestMae:
    def test_perfect_forecasts(self):
        f = np.zeros((5, 3, 2))
        table, mean_k = mae(f, f)
        assert np.all(table == 0.0) and np.all(mean_k == 0.0)

    def test_constant_error(self):
        a = np.zeros((4, 2, 1))
        f = a + 2.5
        table, mean_k = mae(f, a)
        assert np.all(table == 2.5)

    def test_turbine_mean(self):
        a = np.zeros((10, 1, 2))
        f = a.copy()
        f[:, :, 0] += 2.0
        f[:, :, 1] += 4.0
        table, mean_k = mae(f, a)
        assert table[0, 0] == 2.0 and table[1, 0] == 4.0
        assert mean_k[0] == 3.0

    def test_nan_forecast_raises(self):
        f = np.zeros((2, 2, 1))
        f[1, 0, 0] = np.nan
        with pytest.raises(BacktestError, match="NaN"):
            mae(f, np.zeros((2, 2, 1)))


class TestDmae:
    def test_persistence_against_itself(self):
        base = np.array([1.0, 2.0, 3.0])
        assert np.all(dmae(base, base) == 0.0)

    def test_improvement_is_negative(self):
        assert dmae(np.array([3.0]), np.array([7.0]))[0] == -4.0

    def test_additivity(self):
        base = np.array([5.0, 6.0])
        a, b = np.array([4.0, 5.5]), np.array([4.5, 5.0])
        assert np.allclose(dmae(a, base) - dmae(b, base), a - b)


class TestMaeStandardDeviation:
    def test_identical_errors(self):
        assert np.all(mae_standard_deviation(np.full((6, 3), 2.0)) == 0.0)

    def test_two_point_hand_value(self):
        # sample SD of {0, 2} is sqrt(2); divided by sqrt(2) gives exactly 1
        out = mae_standard_deviation(np.array([[0.0], [2.0]]))
        assert out[0] == pytest.approx(1.0)

    def test_scaling(self):
        rng = np.random.default_rng(0)
        e = rng.uniform(0, 1, (30, 4))
        assert np.allclose(mae_standard_deviation(3.0 * e),
                           3.0 * mae_standard_deviation(e))


class TestErrorDensity:
    def test_integrates_to_one(self):
        rng = np.random.default_rng(1)
        grid, dens = error_density(rng.standard_normal(2000))
        assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)

    def test_point_mass_peaks_at_value(self):
        grid, dens = error_density(np.full(50, 1.5), bandwidth=0.1)
        assert grid[np.argmax(dens)] == pytest.approx(1.5, abs=0.05)

    def test_huge_bandwidth_flattens(self):
        rng = np.random.default_rng(2)
        e = rng.standard_normal(500)
        grid = np.linspace(-1, 1, 101)
        _, dens = error_density(e, grid=grid, bandwidth=1e4)
        assert np.ptp(dens) / dens.mean() < 1e-3

    def test_symmetric_errors_roughly_symmetric_density(self):
        rng = np.random.default_rng(3)
        e = rng.standard_normal(5000)
        e = np.concatenate([e, -e])  # exactly symmetric sample
        grid = np.linspace(-4, 4, 201)
        _, dens = error_density(e, grid=grid)
        assert np.abs(dens - dens[::-1]).max() < 1e-12

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            error_density(np.ones(10), bandwidth=0.0)


class TestSampleOrigins:
    def test_origins_leave_room(self):
        spec = BacktestSpec(n_origins=20, horizons=(1, 48), in_sample=100, seed=1)
        origins = sample_origins(500, spec)
        assert origins.min() >= 100
        assert origins.max() <= 500 - 49
        assert np.unique(origins).size == 20

    def test_seed_stability(self):
        spec = BacktestSpec(n_origins=10, horizons=(1, 12), in_sample=50, seed=9)
        assert np.array_equal(sample_origins(300, spec), sample_origins(300, spec))

    def test_too_short_panel(self):
        spec = BacktestSpec(n_origins=10, horizons=(1, 288), in_sample=100)
        with pytest.raises(BacktestError, match="too short"):
            sample_origins(150, spec)


@pytest.fixture(scope="module")
def backtest_panel():
    return simulate_synthetic(tiny_config(), two_turbine_truth(), n=5000, seed=21)


class TestRunBacktest:
    def test_persistence_only_reproduces_mae(self, backtest_panel):
        spec = BacktestSpec(n_origins=15, horizons=tuple(range(1, 25)),
                            in_sample=4000, seed=2, models=("persistence",))
        report = run_backtest(backtest_panel, spec)
        origins = report.origins
        errs = np.empty((origins.size, 24, 2))
        for oi, o in enumerate(origins):
            errs[oi] = np.abs(backtest_panel.power[o + np.arange(1, 25)]
                              - backtest_panel.power[o])
        expect = errs.mean(axis=0).T.mean(axis=0)
        assert np.allclose(report.mae_mean["persistence"], expect)
        assert np.all(report.dmae_mean["persistence"] == 0.0)

    def test_deterministic_runs(self, backtest_panel):
        spec = BacktestSpec(n_origins=8, horizons=(1, 6, 12), in_sample=4200,
                            seed=5, models=("persistence", "ar"))
        r1 = run_backtest(backtest_panel, spec)
        r2 = run_backtest(backtest_panel, spec)
        for name in r1.mae_mean:
            assert np.array_equal(r1.mae_mean[name], r2.mae_mean[name])

    def test_worker_count_independence(self, backtest_panel):
        spec = BacktestSpec(n_origins=8, horizons=(1, 6, 12), in_sample=4200,
                            seed=5, models=("persistence", "ar", "lasso"))
        r1 = run_backtest(backtest_panel, spec, lasso_config=tiny_config(), workers=1)
        r2 = run_backtest(backtest_panel, spec, lasso_config=tiny_config(), workers=3)
        for name in r1.mae_mean:
            assert np.array_equal(r1.mae_mean[name], r2.mae_mean[name])

    def test_report_files(self, backtest_panel, tmp_path):
        spec = BacktestSpec(n_origins=6, horizons=tuple(range(1, 25)),
                            in_sample=4200, seed=3,
                            models=("persistence",),
                            density_horizons=(1, 24),
                            summary_horizons=(1, 6, 24))
        report = run_backtest(backtest_panel, spec)
        files = write_report(report, tmp_path)
        names = {f.split("/")[-1] for f in files}
        assert {"mae.csv", "dmae.csv", "summary.csv", "density_1.csv",
                "density_24.csv", "run_info.csv"} <= names
        header = open(files[0]).readline().strip()
        assert header == "model,turbine,k,mae,sd"

    def test_timings_recorded(self, backtest_panel):
        spec = BacktestSpec(n_origins=5, horizons=(1, 4), in_sample=4200,
                            seed=4, models=("persistence",))
        report = run_backtest(backtest_panel, spec)
        assert report.timings["persistence"] > 0.0
        assert report.failures["persistence"] == []

    def test_model_order_does_not_change_tables(self, backtest_panel):
        kw = dict(n_origins=6, horizons=(1, 6), in_sample=4200, seed=8)
        r1 = run_backtest(backtest_panel, BacktestSpec(models=("persistence", "ar"), **kw))
        r2 = run_backtest(backtest_panel, BacktestSpec(models=("ar", "persistence"), **kw))
        for name in ("persistence", "ar"):
            assert np.array_equal(r1.mae_mean[name], r2.mae_mean[name])
            assert np.array_equal(r1.dmae_mean[name], r2.dmae_mean[name])

    def test_turbine_mean_recomputable_from_table(self, backtest_panel):
        spec = BacktestSpec(n_origins=6, horizons=(1, 6, 12), in_sample=4200,
                            seed=9, models=("persistence",))
        report = run_backtest(backtest_panel, spec)
        table = report.mae_turbine["persistence"]
        assert np.allclose(table.mean(axis=0), report.mae_mean["persistence"])
