import numpy as np
import pytest

from parkcast.basis import (
    ANNUAL_STEPS,
    BSplineSpec,
    bspline_eval,
    cumulative_basis,
    interaction_basis,
    periodic_basis,
    periodic_basis_matrix,
)

DIURNAL = BSplineSpec(3, 144.0, 12, strict_partition=True)
ANNUAL = BSplineSpec(3, ANNUAL_STEPS, 4)


class TestBsplineEval:
    def test_degree_zero_box(self):
        assert bspline_eval(0.5, [0.0, 1.0], 0) == 1.0
        assert bspline_eval(1.5, [0.0, 1.0], 0) == 0.0

    def test_degree_one_triangle_peak(self):
        assert bspline_eval(1.0, [0.0, 1.0, 2.0], 1) == 1.0
        assert bspline_eval(0.5, [0.0, 1.0, 2.0], 1) == 0.5

    def test_outside_support_is_zero(self):
        for deg, knots in ((1, [0, 1, 2]), (3, [-2, -1, 0, 1, 2])):
            assert bspline_eval(knots[0] - 1.0, knots, deg) == 0.0

    def test_nonnegative_everywhere(self):
        t = np.linspace(-3, 3, 1001)
        vals = bspline_eval(t, [-2, -1, 0, 1, 2], 3)
        assert np.all(vals >= 0.0)

    def test_bad_knots_rejected(self):
        with pytest.raises(ValueError):
            bspline_eval(0.5, [0.0, 0.0], 0)
        with pytest.raises(ValueError):
            bspline_eval(0.5, [0.0, 1.0, 2.0], 3)


class TestPeriodicBasis:
    def test_periodicity(self):
        t = np.linspace(0.0, 144.0, 777)
        for j in (1, 5, 12):
            a = periodic_basis(t, DIURNAL, j)
            b = periodic_basis(t + 144.0, DIURNAL, j)
            assert np.max(np.abs(a - b)) < 1e-12

    def test_shift_identity(self):
        t = np.linspace(0.0, 432.0, 1001)
        lhs = periodic_basis(t, DIURNAL, 2)
        rhs = periodic_basis(t - DIURNAL.knot_spacing, DIURNAL, 1)
        assert np.max(np.abs(lhs - rhs)) == 0.0

    def test_partition_of_unity_diurnal(self):
        t = np.linspace(0.0, 144.0, 10_000, endpoint=False)
        total = periodic_basis_matrix(t, DIURNAL).sum(axis=1)
        assert np.max(np.abs(total - 1.0)) <= 1e-9

    def test_partition_of_unity_annual_real_spacing(self):
        t = np.linspace(0.0, 2 * ANNUAL_STEPS, 4001)
        total = periodic_basis_matrix(t, ANNUAL).sum(axis=1)
        assert np.max(np.abs(total - 1.0)) <= 1e-9

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            periodic_basis(0.0, DIURNAL, 13)

    def test_plain_values_bounded_by_constant(self):
        t = np.linspace(0.0, 144.0, 2000)
        vals = periodic_basis_matrix(t, DIURNAL)
        assert vals.min() >= 0.0
        assert vals.max() <= 1.0 + 1e-12

    def test_full_column_rank_over_one_season(self):
        t = np.arange(144.0)
        vals = periodic_basis_matrix(t, DIURNAL)
        assert np.linalg.svd(vals, compute_uv=False)[-1] > 0.0


class TestCumulativeBasis:
    def test_first_column_matches_plain(self):
        t = np.linspace(0.0, 144.0, 500)
        cum = cumulative_basis(t, DIURNAL).values
        plain = periodic_basis_matrix(t, DIURNAL)
        assert np.array_equal(cum[:, 0], plain[:, 0])

    def test_last_column_constant(self):
        t = np.linspace(0.0, 144.0, 500)
        cum = cumulative_basis(t, DIURNAL)
        last = cum.values[:, cum.constant_column]
        assert np.max(np.abs(last - 1.0)) <= 1e-9

    def test_differences_recover_plain(self):
        t = np.linspace(0.0, 288.0, 700)
        cum = cumulative_basis(t, DIURNAL).values
        plain = periodic_basis_matrix(t, DIURNAL)
        diffs = np.diff(cum, axis=1)
        assert np.max(np.abs(diffs - plain[:, 1:])) < 1e-12


class TestInteractionBasis:
    def setup_method(self):
        n = 600
        self.tod = np.arange(n) % 144
        self.toy = np.arange(n, dtype=float)

    def test_cumulative_set_has_48_columns(self):
        bs = interaction_basis(self.tod, self.toy, DIURNAL, ANNUAL, "cumulative")
        assert bs.columns == 48
        assert len(bs.pairs) == 48

    def test_plain_first_column_is_one(self):
        bs = interaction_basis(self.tod, self.toy, DIURNAL, ANNUAL, "plain")
        assert np.all(bs.values[:, 0] == 1.0)
        assert bs.constant_column == 0

    def test_last_cumulative_column_constant(self):
        bs = interaction_basis(self.tod, self.toy, DIURNAL, ANNUAL, "cumulative")
        col = bs.values[:, bs.constant_column]
        assert np.max(np.abs(col - col[0])) <= 1e-9

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            interaction_basis(self.tod, self.toy, DIURNAL, ANNUAL, "fourier")


class TestSpecValidation:
    def test_even_degree_rejected(self):
        with pytest.raises(ValueError):
            BSplineSpec(2, 144.0, 12)

    def test_too_few_basis_functions_rejected(self):
        with pytest.raises(ValueError):
            BSplineSpec(3, 144.0, 3)

    def test_strict_partition_spacing(self):
        with pytest.raises(ValueError):
            BSplineSpec(3, 12.0, 4, strict_partition=True)  # spacing 3 < 4
        BSplineSpec(3, 144.0, 12, strict_partition=True)  # spacing 12 ok
