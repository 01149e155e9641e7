"""Iteratively re-weighted estimation of the joint speed/power model.

One fit runs the boxed scheme: initialize every residual and volatility
proxy at 1 with identity weights (the first pass therefore estimates
threshold AR / power-ARCH models); fit the two mean equations per turbine by
weighted lasso; fit the two volatility equations by nonnegative lasso on the
fresh residuals; floor the fitted volatilities, turn them into inverse-
variance weights and rebuild the proxy-dependent columns; repeat up to
``k_max`` times (two passes are enough in practice).

Scale caveat: the moment factors E|Z| and E|Z|^(1/3) multiply every
volatility coefficient in the regression representation, so fitted
volatility proxies carry an unknown positive scale. Weights and the
bootstrap both use the proxies consistently, so that scale cancels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import ANNUAL_STEPS, BSplineSpec, interaction_basis
from .design import (
    ColumnInfo,
    DesignContext,
    IndexSets,
    ThresholdSet,
    build_power_mean_design,
    build_power_vol_design,
    build_speed_mean_design,
    build_speed_vol_design,
    compute_threshold_set,
    default_index_sets,
)
from .lasso import (
    DegenerateGridError,
    LassoFit,
    LassoProblem,
    LassoSettings,
    coordinate_descent,
    fit_path_bic,
    weighted_bic,
)
from .panel import CalendarIndex, TurbinePanel


class ModelFitError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Everything that determines a fit apart from the data."""

    sets: IndexSets = field(default_factory=default_index_sets)
    threshold_policy: object = "deciles"  # "deciles" | "none" | {"speed": [...], "power": [...]}
    diurnal: BSplineSpec = BSplineSpec(3, 144.0, 12, strict_partition=True)
    annual: BSplineSpec = BSplineSpec(3, ANNUAL_STEPS, 4)
    k_max: int = 2
    vol_floor_fraction: float = 1e-3
    min_rows: int = 5000
    lasso: LassoSettings = field(default_factory=LassoSettings)

    def __post_init__(self) -> None:
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not 0.0 < self.vol_floor_fraction < 1.0:
            raise ValueError("vol_floor_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class Term:
    """One nonzero coefficient with enough metadata to rebuild its regressor."""

    family: str
    j: int
    lag: int
    threshold: float
    basis_index: int  # -1 for a constant coefficient
    time_varying: bool
    value: float


EQUATIONS = ("speed_mean", "power_mean", "speed_vol", "power_vol")


@dataclass
class FittedJointModel:
    """Sparse coefficients for all four equations plus the state needed to
    forecast: in-sample residuals, floored volatility proxies (power on the
    cube-root scale) and standardized residual pools."""

    labels: tuple[str, ...]
    trim: int
    k_max: int
    vol_floor_fraction: float
    diurnal: BSplineSpec
    annual: BSplineSpec
    anchor_epoch: int
    terms: dict[tuple[str, int], list[Term]]
    timestamps: np.ndarray  # rows covered by the state matrices below
    speed_resid: np.ndarray
    power_resid: np.ndarray
    speed_vol: np.ndarray
    power_vol: np.ndarray
    speed_floors: np.ndarray  # per turbine
    power_floors: np.ndarray
    speed_pool: np.ndarray  # standardized residual rows (m, d)
    power_pool: np.ndarray
    thresholds: ThresholdSet | None = None
    fits: dict[tuple[str, int], LassoFit] | None = None

    @property
    def d(self) -> int:
        return len(self.labels)


def compute_residuals(design_values: np.ndarray, coefficients: np.ndarray,
                      response: np.ndarray) -> np.ndarray:
    """response - design @ coefficients, elementwise on the effective sample."""
    if design_values.shape[0] != response.shape[0]:
        raise ValueError("design and response lengths disagree")
    return response - design_values @ coefficients


def volatility_proxy(fitted_abs_values: np.ndarray, floor_fraction: float):
    """Floor fitted volatility values at ``floor_fraction`` times the median
    positive fitted value; returns (floored values, floor)."""
    fitted = np.asarray(fitted_abs_values, dtype=float)
    positive = fitted[fitted > 0]
    if positive.size == 0:
        raise ModelFitError("degenerate volatility: no positive fitted values")
    floor = floor_fraction * float(np.median(positive))
    return np.maximum(fitted, floor), floor


def _penalize_mask(columns: list[ColumnInfo], const_basis_col: int) -> np.ndarray:
    mask = np.ones(len(columns), dtype=bool)
    for c, info in enumerate(columns):
        if info.family == "const" and info.basis_index == const_basis_col:
            mask[c] = False
    return mask


def _fit_equation(equation: str, i: int, problem: LassoProblem,
                  settings: LassoSettings) -> LassoFit:
    try:
        fit = fit_path_bic(problem, settings)
    except DegenerateGridError:
        # nothing penalizable explains the response (e.g. constant panel):
        # keep the penalized coefficients at zero and fit the intercept side
        coef = np.zeros(problem.p)
        unpen = np.flatnonzero(~problem.penalize_mask)
        if unpen.size:
            sub = LassoProblem(problem.response, problem.design[:, unpen],
                               weights=problem.weights,
                               nonnegative=problem.nonnegative)
            coef[unpen] = coordinate_descent(sub, 0.0, tol=settings.tol,
                                             max_sweeps=settings.max_sweeps)
        bic, flag = weighted_bic(problem, coef)
        fit = LassoFit(
            lambdas=np.array([0.0]),
            coef_path=coef[None, :],
            bic_path=np.array([bic]),
            selected_index=0,
            sweeps=np.array([0]),
            converged=np.array([True]),
            objective=float(bic) if np.isfinite(bic) else 0.0,
            zero_rss=flag,
        )
    if fit.zero_rss:
        warnings.warn(f"{equation}[{i}]: zero residual sum of squares (degenerate fit)")
    return fit


def _proxy_or_unit(equation: str, i: int, fitted: np.ndarray, config: ModelConfig):
    """Floor the fitted volatilities; a fully degenerate equation (all fitted
    values zero, e.g. on a constant panel) degrades to unit volatility."""
    try:
        return volatility_proxy(fitted, config.vol_floor_fraction)
    except ModelFitError:
        warnings.warn(f"{equation}[{i}]: degenerate volatility, using unit proxy")
        return np.ones_like(fitted), 1.0


def _terms_from_fit(columns: list[ColumnInfo], coefficients: np.ndarray) -> list[Term]:
    out = []
    for c, info in enumerate(columns):
        v = coefficients[c]
        if v != 0.0:
            out.append(Term(info.family, info.j, info.lag, info.threshold,
                            info.basis_index, info.time_varying, float(v)))
    return out


def fit_joint_model(panel: TurbinePanel, config: ModelConfig | None = None) -> FittedJointModel:
    """Run the full iteratively re-weighted estimation on a gap-free panel."""
    config = config or ModelConfig()
    if panel.has_missing():
        raise ModelFitError("panel has missing values; fill gaps before fitting")
    W, P = panel.speed, panel.power
    n, d = W.shape
    sets = config.sets
    trim = sets.max_lag()
    if n <= trim + config.min_rows:
        raise ModelFitError(
            f"panel too short: need more than {trim + config.min_rows} rows "
            f"(max lag {trim} + min sample {config.min_rows}), got {n}"
        )

    cal = CalendarIndex.from_timestamps(panel.timestamps)
    mean_set = interaction_basis(cal.time_of_day, cal.time_of_year,
                                 config.diurnal, config.annual, "cumulative")
    vol_set = interaction_basis(cal.time_of_day, cal.time_of_year,
                                config.diurnal, config.annual, "plain")
    thresholds = compute_threshold_set(W, P, sets, config.threshold_policy)

    m = n - trim
    speed_resid = np.ones((n, d))
    power_resid = np.ones((n, d))
    speed_vol = np.ones((n, d))
    power_vol = np.ones((n, d))
    omega = np.ones((m, d))
    xi = np.ones((m, d))
    speed_floors = np.ones(d)
    power_floors = np.ones(d)

    fits: dict[tuple[str, int], LassoFit] = {}
    columns: dict[tuple[str, int], list[ColumnInfo]] = {}

    for _ in range(config.k_max):
        ctx = DesignContext(W, P, speed_resid, power_resid, speed_vol, power_vol,
                            mean_set.values, vol_set.values, trim)
        new_speed_resid = np.zeros((n, d))
        new_power_resid = np.zeros((n, d))

        for i in range(d):
            dm, y = build_speed_mean_design(ctx, i, sets, thresholds)
            prob = LassoProblem(y, dm.values, weights=omega[:, i],
                                penalize_mask=_penalize_mask(dm.columns,
                                                             mean_set.constant_column))
            fit = _fit_equation("speed_mean", i, prob, config.lasso)
            fits[("speed_mean", i)] = fit
            columns[("speed_mean", i)] = dm.columns
            new_speed_resid[trim:, i] = compute_residuals(dm.values, fit.coefficients, y)

        for i in range(d):
            dm, y = build_power_mean_design(ctx, i, sets, thresholds)
            prob = LassoProblem(y, dm.values, weights=xi[:, i],
                                penalize_mask=_penalize_mask(dm.columns,
                                                             mean_set.constant_column))
            fit = _fit_equation("power_mean", i, prob, config.lasso)
            fits[("power_mean", i)] = fit
            columns[("power_mean", i)] = dm.columns
            new_power_resid[trim:, i] = compute_residuals(dm.values, fit.coefficients, y)

        # volatility designs see the fresh residuals but last iteration's proxies
        ctx_vol = DesignContext(W, P, new_speed_resid, new_power_resid,
                                speed_vol, power_vol,
                                mean_set.values, vol_set.values, trim)
        new_speed_vol = np.empty((n, d))
        new_power_vol = np.empty((n, d))

        for i in range(d):
            dm, y = build_speed_vol_design(ctx_vol, i, sets)
            prob = LassoProblem(y, dm.values, nonnegative=True,
                                penalize_mask=_penalize_mask(dm.columns,
                                                             vol_set.constant_column))
            fit = _fit_equation("speed_vol", i, prob, config.lasso)
            if np.any(fit.coefficients < 0.0):
                raise AssertionError("nonnegative fit returned a negative coefficient")
            fits[("speed_vol", i)] = fit
            columns[("speed_vol", i)] = dm.columns
            fv = dm.values @ fit.coefficients
            proxy, speed_floors[i] = _proxy_or_unit("speed_vol", i, fv, config)
            new_speed_vol[trim:, i] = proxy
            new_speed_vol[:trim, i] = np.median(proxy)

        for i in range(d):
            dm, y = build_power_vol_design(ctx_vol, i, sets)
            prob = LassoProblem(y, dm.values, nonnegative=True,
                                penalize_mask=_penalize_mask(dm.columns,
                                                             vol_set.constant_column))
            fit = _fit_equation("power_vol", i, prob, config.lasso)
            if np.any(fit.coefficients < 0.0):
                raise AssertionError("nonnegative fit returned a negative coefficient")
            fits[("power_vol", i)] = fit
            columns[("power_vol", i)] = dm.columns
            fv = dm.values @ fit.coefficients
            proxy, power_floors[i] = _proxy_or_unit("power_vol", i, fv, config)
            new_power_vol[trim:, i] = proxy
            new_power_vol[:trim, i] = np.median(proxy)

        speed_resid, power_resid = new_speed_resid, new_power_resid
        speed_vol, power_vol = new_speed_vol, new_power_vol
        for i in range(d):
            w = speed_vol[trim:, i] ** -2.0
            omega[:, i] = w / w.mean()
            x6 = power_vol[trim:, i] ** -6.0
            xi[:, i] = x6 / x6.mean()
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(xi))):
            raise AssertionError("non-finite heteroscedasticity weights (floor bug)")

    terms = {
        key: _terms_from_fit(columns[key], fits[key].coefficients) for key in fits
    }
    return FittedJointModel(
        labels=panel.labels,
        trim=trim,
        k_max=config.k_max,
        vol_floor_fraction=config.vol_floor_fraction,
        diurnal=config.diurnal,
        annual=config.annual,
        anchor_epoch=cal.anchor_epoch,
        terms=terms,
        timestamps=panel.timestamps.copy(),
        speed_resid=speed_resid,
        power_resid=power_resid,
        speed_vol=speed_vol,
        power_vol=power_vol,
        speed_floors=speed_floors,
        power_floors=power_floors,
        speed_pool=speed_resid[trim:] / speed_vol[trim:],
        power_pool=power_resid[trim:] / power_vol[trim:] ** 3,
        thresholds=thresholds,
        fits=fits,
    )


# ---------------------------------------------------------------------------
# serialization: versioned text format, hex floats for exact round trips


_FORMAT_TAG = "parkcast-model"
_FORMAT_VERSION = 1


def _hex(x: float) -> str:
    return float(x).hex()


def _write_matrix(fh, name: str, arr: np.ndarray) -> None:
    arr = np.atleast_2d(arr)
    fh.write(f"[{name}] {arr.shape[0]} {arr.shape[1]}\n")
    for row in arr:
        fh.write(" ".join(_hex(v) for v in row) + "\n")


def save_model(model: FittedJointModel, path, tail_rows: int = 150) -> None:
    """Serialize to a self-describing flat text file.

    Stores the config scalars, basis specs, thresholds, sparse coefficient
    triplets with metadata, the training-sample tail needed to start the
    recursions, and the full standardized residual pools so bootstrap
    forecasts also round-trip bit-exactly.
    """
    tail = min(model.timestamps.shape[0], max(tail_rows, model.trim))
    with open(path, "w") as fh:
        fh.write(f"{_FORMAT_TAG} {_FORMAT_VERSION}\n")
        fh.write(f"labels {','.join(model.labels)}\n")
        fh.write(f"trim {model.trim}\n")
        fh.write(f"k_max {model.k_max}\n")
        fh.write(f"vol_floor_fraction {_hex(model.vol_floor_fraction)}\n")
        fh.write(f"anchor_epoch {model.anchor_epoch}\n")
        for name, spec in (("diurnal", model.diurnal), ("annual", model.annual)):
            fh.write(f"{name} {spec.degree} {_hex(spec.season_length)} "
                     f"{spec.n_basis} {int(spec.strict_partition)}\n")
        fh.write("speed_floors " + " ".join(_hex(v) for v in model.speed_floors) + "\n")
        fh.write("power_floors " + " ".join(_hex(v) for v in model.power_floors) + "\n")
        thr = model.thresholds
        for name, rows in (("deciles.speed", thr.speed_deciles if thr else []),
                           ("deciles.power", thr.power_deciles if thr else [])):
            rows = list(rows) or [np.empty(0)] * model.d
            width = max(v.size for v in rows)
            padded = np.full((len(rows), width), np.nan)
            for k, v in enumerate(rows):
                padded[k, : v.size] = v
            _write_matrix(fh, name, padded)
        for eq in EQUATIONS:
            for i in range(model.d):
                terms = model.terms.get((eq, i), [])
                fh.write(f"[terms {eq} {i}] {len(terms)}\n")
                for t in terms:
                    fh.write(f"{t.family} {t.j} {t.lag} {_hex(t.threshold)} "
                             f"{t.basis_index} {int(t.time_varying)} {_hex(t.value)}\n")
        ts = model.timestamps[-tail:]
        fh.write(f"[tail.timestamps] {ts.size}\n")
        fh.write(" ".join(str(int(v)) for v in ts) + "\n")
        _write_matrix(fh, "tail.speed_resid", model.speed_resid[-tail:])
        _write_matrix(fh, "tail.power_resid", model.power_resid[-tail:])
        _write_matrix(fh, "tail.speed_vol", model.speed_vol[-tail:])
        _write_matrix(fh, "tail.power_vol", model.power_vol[-tail:])
        _write_matrix(fh, "pool.speed", model.speed_pool)
        _write_matrix(fh, "pool.power", model.power_pool)
        fh.write("end\n")


class ModelFormatError(Exception):
    pass


class _Reader:
    def __init__(self, fh):
        self.lines = (ln.rstrip("\n") for ln in fh)

    def next(self) -> str:
        try:
            return next(self.lines)
        except StopIteration:
            raise ModelFormatError("unexpected end of model file") from None

    def keyed(self, key: str) -> list[str]:
        line = self.next()
        parts = line.split()
        if not parts or parts[0] != key:
            raise ModelFormatError(f"expected {key!r}, found {line!r}")
        return parts[1:]

    def section(self, name: str) -> list[str]:
        line = self.next()
        if not line.startswith(f"[{name}]"):
            raise ModelFormatError(f"expected section {name!r}, found {line!r}")
        return line[len(name) + 2 :].split()

    def matrix(self, name: str) -> np.ndarray:
        rows, cols = (int(v) for v in self.section(name))
        out = np.empty((rows, cols))
        for r in range(rows):
            vals = self.next().split()
            if len(vals) != cols:
                raise ModelFormatError(f"section {name}: row {r} has {len(vals)} values")
            out[r] = [float.fromhex(v) for v in vals]
        return out


def load_model(path) -> FittedJointModel:
    """Read a file written by :func:`save_model`; the result forecasts
    identically to the model that was saved."""
    with open(path) as fh:
        r = _Reader(fh)
        head = r.next().split()
        if head[:1] != [_FORMAT_TAG] or int(head[1]) != _FORMAT_VERSION:
            raise ModelFormatError(f"not a {_FORMAT_TAG} v{_FORMAT_VERSION} file")
        labels = tuple(r.keyed("labels")[0].split(","))
        trim = int(r.keyed("trim")[0])
        k_max = int(r.keyed("k_max")[0])
        floor_frac = float.fromhex(r.keyed("vol_floor_fraction")[0])
        anchor = int(r.keyed("anchor_epoch")[0])
        specs = {}
        for name in ("diurnal", "annual"):
            deg, s, nb, strict = r.keyed(name)
            specs[name] = BSplineSpec(int(deg), float.fromhex(s), int(nb),
                                      strict_partition=bool(int(strict)))
        speed_floors = np.array([float.fromhex(v) for v in r.keyed("speed_floors")])
        power_floors = np.array([float.fromhex(v) for v in r.keyed("power_floors")])
        dec_speed = r.matrix("deciles.speed")
        dec_power = r.matrix("deciles.power")
        terms: dict[tuple[str, int], list[Term]] = {}
        for eq in EQUATIONS:
            for i in range(len(labels)):
                (count,) = r.section(f"terms {eq} {i}")
                lst = []
                for _ in range(int(count)):
                    fam, j, lag, thr, bidx, tv, val = r.next().split()
                    lst.append(Term(fam, int(j), int(lag), float.fromhex(thr),
                                    int(bidx), bool(int(tv)), float.fromhex(val)))
                terms[(eq, i)] = lst
        (n_ts,) = r.section("tail.timestamps")
        ts = np.array([int(v) for v in r.next().split()], dtype=np.int64)
        if ts.size != int(n_ts):
            raise ModelFormatError("tail timestamp count mismatch")
        speed_resid = r.matrix("tail.speed_resid")
        power_resid = r.matrix("tail.power_resid")
        speed_vol = r.matrix("tail.speed_vol")
        power_vol = r.matrix("tail.power_vol")
        pool_speed = r.matrix("pool.speed")
        pool_power = r.matrix("pool.power")
        if r.next() != "end":
            raise ModelFormatError("missing end marker")

    thresholds = ThresholdSet(
        [row[~np.isnan(row)] for row in dec_speed],
        [row[~np.isnan(row)] for row in dec_power],
        threshold_lags={},
    )
    return FittedJointModel(
        labels=labels,
        trim=trim,
        k_max=k_max,
        vol_floor_fraction=floor_frac,
        diurnal=specs["diurnal"],
        annual=specs["annual"],
        anchor_epoch=anchor,
        terms=terms,
        timestamps=ts,
        speed_resid=speed_resid,
        power_resid=power_resid,
        speed_vol=speed_vol,
        power_vol=power_vol,
        speed_floors=speed_floors,
        power_floors=power_floors,
        speed_pool=pool_speed,
        power_pool=pool_power,
        thresholds=thresholds,
        fits=None,
    )
