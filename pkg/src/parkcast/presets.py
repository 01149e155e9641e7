"""Ready-made synthetic generators and reduced model configurations.

The shipped turbine data cannot be redistributed, so demos, CLI smoke runs
and recovery experiments work against synthetic panels drawn from known
coefficient sets with the same structure the estimator targets: periodic
levels, threshold autoregression, a nonlinear speed-to-power curve and
threshold-heteroscedastic shocks on both series.
"""

from __future__ import annotations

import numpy as np

from .basis import ANNUAL_STEPS, BSplineSpec
from .design import FamilySpec, IndexSets
from .lasso import LassoSettings
from .model import ModelConfig, Term

NO_THR = -np.inf
NAN = float("nan")


def compact_index_sets(own_max: int = 3, cross_max: int = 1,
                       vol_max: int = 1, tv: bool = False,
                       thresholds: bool = False) -> IndexSets:
    """Small lag structure for experiments: own lags 1..own_max, cross lags
    1..cross_max, volatility lags 1..vol_max; optional time variation and
    thresholds on the first lags, mirroring the production layout."""
    own = tuple(range(1, own_max + 1))
    cross = tuple(range(1, cross_max + 1))
    vol = tuple(range(1, vol_max + 1))
    tv_own = tuple(k for k in (1, 2) if k <= own_max) if tv else ()
    tv_cross = tuple(k for k in (1, 2) if k <= cross_max) if tv else ()
    thr = tuple(k for k in (1, 2) if k <= own_max) if thresholds else ()
    own0 = (0,) + own
    cross0 = (0,) + cross
    tv0 = ((0,) + tv_own) if tv else ()
    thr0 = ((0,) + thr[:1]) if thresholds else ()
    return IndexSets(
        speed_ar=FamilySpec(own, cross, tv_own, tv_cross, thr),
        speed_ma=FamilySpec(vol, (), (), ()),
        speed_shock=FamilySpec(vol, vol, (), ()),
        speed_vol_lag=FamilySpec(vol, (), (), ()),
        power_ar=FamilySpec(own, cross, tv_own, tv_cross, thr),
        speed_reg=FamilySpec(own0, cross0, tv0, (), thr0),
        power_ma=FamilySpec(vol, (), (), ()),
        speed_err=FamilySpec((0,) + vol, (), (), ()),
        power_shock=FamilySpec(vol, vol, (), ()),
        power_vol_lag=FamilySpec(vol, (), (), ()),
        cross_shock=FamilySpec(vol, (), (), ()),
        cross_vol_lag=FamilySpec(vol, (), (), ()),
    )


def demo_config(n_rows_hint: int = 60000) -> ModelConfig:
    """Configuration sized for synthetic experiments: compact lags with
    thresholds, the production diurnal basis, and an annual basis that can
    still be identified on a panel of ``n_rows_hint`` rows."""
    annual = (BSplineSpec(3, ANNUAL_STEPS, 4) if n_rows_hint >= 50000
              else BSplineSpec(3, 4032.0, 4))  # four-week season for short panels
    return ModelConfig(
        sets=compact_index_sets(own_max=3, cross_max=1, vol_max=1,
                                tv=False, thresholds=True),
        threshold_policy="deciles",
        diurnal=BSplineSpec(3, 144.0, 6, strict_partition=True),
        annual=annual,
        k_max=2,
        min_rows=1000,
        lasso=LassoSettings(grid_count=60, grid_ratio=1e-3),
    )


def example_generator(d: int = 2, diurnal_amp: float = 1.0):
    """True coefficients for a heteroscedastic periodic two-series panel.

    Speed follows a threshold AR with a diurnal level cycle and TGARCH
    shocks; power loads on a piecewise-linear function of current speed plus
    its own persistence, with power-threshold-GARCH shocks coupled to the
    speed volatility. Designed to sit well inside the estimator's model
    class while keeping every recursion comfortably stable.
    """
    terms: dict[tuple[str, int], list[Term]] = {}
    for i in range(d):
        j2 = (i + 1) % d
        cross = [Term("speed_ar", j2, 1, NO_THR, -1, False, 0.05)] if d > 1 else []
        terms[("speed_mean", i)] = [
            # level plus a diurnal swing built from two cumulative columns
            Term("const", -1, 0, NAN, -1, False, 1.1 + 0.1 * i),
            Term("const", -1, 0, NAN, 1, True, 0.5 * diurnal_amp),
            Term("const", -1, 0, NAN, 3, True, -0.35 * diurnal_amp),
            Term("speed_ar", i, 1, NO_THR, -1, False, 0.52),
            Term("speed_ar", i, 1, 6.0, -1, False, 0.1),
            Term("speed_ar", i, 2, NO_THR, -1, False, 0.18),
        ] + cross
        terms[("speed_vol", i)] = [
            Term("const", -1, 0, NAN, -1, False, 0.22),
            Term("pos_shock", i, 1, NAN, -1, False, 0.22),
            Term("neg_shock", i, 1, NAN, -1, False, 0.3),
            Term("vol_lag", i, 1, NAN, -1, False, 0.25),
        ]
        terms[("power_mean", i)] = [
            Term("const", -1, 0, NAN, -1, False, 4.0),
            Term("power_ar", i, 1, NO_THR, -1, False, 0.55),
            Term("power_ar", i, 2, NO_THR, -1, False, 0.1),
            # piecewise-linear power curve in the current wind speed
            Term("speed_reg", i, 0, NO_THR, -1, False, 2.0),
            Term("speed_reg", i, 0, 5.0, -1, False, 9.0),
            Term("speed_reg", i, 0, 9.0, -1, False, -6.0),
        ]
        terms[("power_vol", i)] = [
            Term("const", -1, 0, NAN, -1, False, 0.9),
            Term("pos_shock", i, 1, NAN, -1, False, 0.2),
            Term("neg_shock", i, 1, NAN, -1, False, 0.26),
            Term("speed_vol_lag", i, 1, NAN, -1, False, 0.25),
        ]
    return terms
