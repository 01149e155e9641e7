import numpy as np
import pytest

from parkcast.basis import BSplineSpec
from parkcast.design import FamilySpec, IndexSets
from parkcast.forecast import simulate_synthetic
from parkcast.lasso import LassoSettings
from parkcast.model import ModelConfig, Term, fit_joint_model

NAN = float("nan")
NO_THR = -np.inf


def tiny_sets(ar_own=(1,), ar_cross=(1,), shock=(1,), with_ma=False):
    empty = FamilySpec((), ())
    ma = FamilySpec((1,), ()) if with_ma else empty
    return IndexSets(
        speed_ar=FamilySpec(tuple(ar_own), tuple(ar_cross)),
        speed_ma=ma,
        speed_shock=FamilySpec(tuple(shock), ()),
        speed_vol_lag=empty,
        power_ar=FamilySpec((1,), ()),
        speed_reg=FamilySpec((0,), ()),
        power_ma=ma,
        speed_err=empty,
        power_shock=FamilySpec(tuple(shock), ()),
        power_vol_lag=empty,
        cross_shock=empty,
        cross_vol_lag=empty,
    )


def tiny_config(**over):
    base = dict(
        sets=tiny_sets(),
        threshold_policy="none",
        diurnal=BSplineSpec(3, 144.0, 4),
        annual=BSplineSpec(3, 1008.0, 4),  # one "slow" week for short panels
        k_max=2,
        min_rows=100,
        lasso=LassoSettings(grid_count=40, grid_ratio=1e-3),
    )
    base.update(over)
    return ModelConfig(**base)


def two_turbine_truth():
    terms = {}
    for i in range(2):
        terms[("speed_mean", i)] = [
            Term("const", -1, 0, NAN, -1, False, 2.0),
            Term("speed_ar", i, 1, NO_THR, -1, False, 0.6),
            Term("speed_ar", 1 - i, 1, NO_THR, -1, False, 0.1),
        ]
        terms[("power_mean", i)] = [
            Term("const", -1, 0, NAN, -1, False, 1.0),
            Term("speed_reg", i, 0, NO_THR, -1, False, 3.0),
            Term("power_ar", i, 1, NO_THR, -1, False, 0.3),
        ]
        terms[("speed_vol", i)] = [
            Term("const", -1, 0, NAN, -1, False, 0.3),
            Term("pos_shock", i, 1, NAN, -1, False, 0.3),
        ]
        terms[("power_vol", i)] = [
            Term("const", -1, 0, NAN, -1, False, 0.8),
        ]
    return terms


@pytest.fixture(scope="session")
def small_panel():
    return simulate_synthetic(tiny_config(), two_turbine_truth(), n=6000, seed=3)


@pytest.fixture(scope="session")
def small_model(small_panel):
    return fit_joint_model(small_panel, tiny_config())
