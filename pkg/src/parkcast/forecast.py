"""Multi-step forecasting and simulation on the fitted recursions.

Point forecasts plug the recursions forward with future shocks at zero;
probabilistic forecasts resample whole cross-sectional rows of standardized
in-sample residuals (preserving the dependence across turbines and between
speed and power), re-scale them by the recursion's current volatility and
collect empirical percentiles. Path draws come from a counter-based
generator keyed by (seed, path), so results do not depend on worker count.

The same stepping engine also filters observed data beyond the training
sample (to obtain residual state at backtest origins) and simulates
synthetic panels from known coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import interaction_basis
from .model import FittedJointModel, Term
from .panel import STEP_SECONDS, CalendarIndex, TurbinePanel

PERCENTILES = np.arange(1, 100)


class ForecastError(Exception):
    pass


@dataclass
class ForecastResult:
    """Per-horizon point forecasts and, for bootstrap runs, percentile fans.

    ``speed_quantiles``/``power_quantiles`` have shape (horizon, d, 99) and
    are non-decreasing along the percentile axis.
    """

    origin_index: int
    origin_timestamp: int
    horizon: int
    labels: tuple[str, ...]
    speed_point: np.ndarray
    power_point: np.ndarray
    speed_quantiles: np.ndarray | None = None
    power_quantiles: np.ndarray | None = None
    n_paths: int = 0
    seed: int | None = None


# per family: which state variable feeds it and how the value is transformed
_FAMILY_SOURCE = {
    ("speed_mean", "speed_ar"): ("W", "thr"),
    ("speed_mean", "speed_ma"): ("E", "id"),
    ("power_mean", "power_ar"): ("P", "thr"),
    ("power_mean", "speed_reg"): ("W", "thr"),
    ("power_mean", "power_ma"): ("Ep", "id"),
    ("power_mean", "speed_err"): ("E", "id"),
    ("speed_vol", "pos_shock"): ("E", "pos"),
    ("speed_vol", "neg_shock"): ("E", "neg"),
    ("speed_vol", "vol_lag"): ("Sv", "id"),
    ("power_vol", "pos_shock"): ("Ep", "cbrt_pos"),
    ("power_vol", "neg_shock"): ("Ep", "cbrt_neg"),
    ("power_vol", "vol_lag"): ("Pv", "id"),
    ("power_vol", "speed_pos_shock"): ("E", "cbrt_pos"),
    ("power_vol", "speed_neg_shock"): ("E", "cbrt_neg"),
    ("power_vol", "speed_vol_lag"): ("Sv", "cbrt"),
}


@dataclass
class _Group:
    """All coefficients sharing one regressor (same family/source/lag/threshold)."""

    var: str
    transform: str
    j: int
    lag: int
    threshold: float
    const_coef: float
    tv_idx: np.ndarray
    tv_coefs: np.ndarray


@dataclass
class _Compiled:
    intercept_const: float
    intercept_idx: np.ndarray
    intercept_coefs: np.ndarray
    groups: list[_Group]
    max_lag: int
    min_lag: int


def _compile(equation: str, terms: list[Term]) -> _Compiled:
    groups: dict[tuple, list[Term]] = {}
    icst, iidx, icoef = 0.0, [], []
    for t in terms:
        if t.family == "const":
            if t.basis_index < 0:
                icst += t.value
            else:
                iidx.append(t.basis_index)
                icoef.append(t.value)
            continue
        key = (t.family, t.j, t.lag, t.threshold)
        groups.setdefault(key, []).append(t)
    compiled = []
    for (family, j, lag, thr), lst in groups.items():
        source = _FAMILY_SOURCE.get((equation, family))
        if source is None:
            raise ForecastError(f"unknown family {family!r} in {equation}")
        const = sum(t.value for t in lst if t.basis_index < 0)
        tv = [(t.basis_index, t.value) for t in lst if t.basis_index >= 0]
        compiled.append(_Group(
            var=source[0], transform=source[1], j=j, lag=lag, threshold=thr,
            const_coef=float(const),
            tv_idx=np.array([k for k, _ in tv], dtype=int),
            tv_coefs=np.array([v for _, v in tv]),
        ))
    lags = [g.lag for g in compiled]
    return _Compiled(
        intercept_const=icst,
        intercept_idx=np.array(iidx, dtype=int),
        intercept_coefs=np.array(icoef),
        groups=compiled,
        max_lag=max(lags, default=0),
        min_lag=min(lags, default=1),
    )


def _transform(x, code: str, threshold: float):
    if code == "id":
        return x
    if code == "thr":
        return x if threshold == -np.inf else np.maximum(x, threshold)
    if code == "pos":
        return np.maximum(x, 0.0)
    if code == "neg":
        return np.maximum(-x, 0.0)
    if code == "cbrt_pos":
        return np.cbrt(np.maximum(x, 0.0))
    if code == "cbrt_neg":
        return np.cbrt(np.maximum(-x, 0.0))
    if code == "cbrt":
        return np.cbrt(x)
    raise ForecastError(f"unknown transform {code}")


def _eval(compiled: _Compiled, state: dict, pos: int, basis_row: np.ndarray):
    total = compiled.intercept_const
    if compiled.intercept_idx.size:
        total = total + float(np.dot(compiled.intercept_coefs,
                                     basis_row[compiled.intercept_idx]))
    for g in compiled.groups:
        coef = g.const_coef
        if g.tv_idx.size:
            coef += float(np.dot(g.tv_coefs, basis_row[g.tv_idx]))
        if coef == 0.0:
            continue
        x = _transform(state[g.var][..., g.j, pos - g.lag], g.transform, g.threshold)
        total = total + coef * x
    return total


class _Engine:
    """Shared stepping logic over a window of state arrays.

    State arrays have shape (n_paths, d, T); the first ``hist`` positions
    hold history, later positions are written by the step methods.
    """

    def __init__(self, model: FittedJointModel):
        self.model = model
        self.d = model.d
        self.eqs = {}
        for eq in ("speed_mean", "power_mean", "speed_vol", "power_vol"):
            for i in range(self.d):
                c = _compile(eq, model.terms.get((eq, i), []))
                if eq.endswith("_vol") and c.groups and c.min_lag < 1:
                    raise ForecastError(f"{eq}[{i}]: volatility terms need lag >= 1")
                self.eqs[(eq, i)] = c

    def basis_rows(self, timestamps: np.ndarray):
        cal = CalendarIndex.from_timestamps(timestamps, self.model.anchor_epoch)
        mean_b = interaction_basis(cal.time_of_day, cal.time_of_year,
                                   self.model.diurnal, self.model.annual,
                                   "cumulative").values
        vol_b = interaction_basis(cal.time_of_day, cal.time_of_year,
                                  self.model.diurnal, self.model.annual,
                                  "plain").values
        return mean_b, vol_b

    def step_vol(self, state, pos, vol_row):
        m = self.model
        for i in range(self.d):
            sv = _eval(self.eqs[("speed_vol", i)], state, pos, vol_row)
            state["Sv"][..., i, pos] = np.maximum(sv, m.speed_floors[i])
        for i in range(self.d):
            pv = _eval(self.eqs[("power_vol", i)], state, pos, vol_row)
            state["Pv"][..., i, pos] = np.maximum(pv, m.power_floors[i])

    def step_mean(self, state, pos, mean_row, speed_shock, power_shock):
        """Advance both mean recursions with the given shock rows
        (arrays broadcastable to (n_paths, d))."""
        for i in range(self.d):
            state["E"][..., i, pos] = speed_shock[..., i]
            state["W"][..., i, pos] = (
                _eval(self.eqs[("speed_mean", i)], state, pos, mean_row)
                + speed_shock[..., i]
            )
        for i in range(self.d):
            state["Ep"][..., i, pos] = power_shock[..., i]
            state["P"][..., i, pos] = (
                _eval(self.eqs[("power_mean", i)], state, pos, mean_row)
                + power_shock[..., i]
            )

    def step_filter(self, state, pos, mean_row, vol_row, w_obs, p_obs):
        """One observed row: advance volatilities, then back out the shocks.
        ``state['W']``/``state['P']`` already hold the observations."""
        self.step_vol(state, pos, vol_row)
        for i in range(self.d):
            fitted = _eval(self.eqs[("speed_mean", i)], state, pos, mean_row)
            state["E"][..., i, pos] = w_obs[i] - fitted
        for i in range(self.d):
            fitted = _eval(self.eqs[("power_mean", i)], state, pos, mean_row)
            state["Ep"][..., i, pos] = p_obs[i] - fitted


def _locate(model: FittedJointModel, panel: TurbinePanel) -> int:
    """Panel row index of the first model-covered row; model timestamps must
    be a contiguous run of panel timestamps."""
    start = int(np.searchsorted(panel.timestamps, model.timestamps[0]))
    k = model.timestamps.shape[0]
    if (start + k > panel.n
            or not np.array_equal(panel.timestamps[start:start + k],
                                  model.timestamps)):
        raise ForecastError("model state timestamps do not align with the panel")
    return start


class Forecaster:
    """Binds a fitted model to a panel; filters residual state forward as
    needed and serves point / bootstrap forecasts from any origin row."""

    def __init__(self, model: FittedJointModel, panel: TurbinePanel):
        if panel.has_missing():
            raise ForecastError("panel has missing values")
        self.model = model
        self.panel = panel
        self.engine = _Engine(model)
        self.start = _locate(model, panel)
        n, d = panel.n, panel.d
        self.E = np.zeros((n, d))
        self.Ep = np.zeros((n, d))
        self.Sv = np.tile(model.speed_floors, (n, 1))
        self.Pv = np.tile(model.power_floors, (n, 1))
        k = model.timestamps.shape[0]
        self.E[self.start:self.start + k] = model.speed_resid
        self.Ep[self.start:self.start + k] = model.power_resid
        self.Sv[self.start:self.start + k] = model.speed_vol
        self.Pv[self.start:self.start + k] = model.power_vol
        self.covered_through = self.start + k - 1

    # -- filtering --------------------------------------------------------

    def ensure_state(self, row: int) -> None:
        if row <= self.covered_through:
            return
        lo, hi = self.covered_through + 1, row
        mean_b, vol_b = self.engine.basis_rows(self.panel.timestamps[lo:hi + 1])
        state = {
            "W": self.panel.speed.T[None], "P": self.panel.power.T[None],
            "E": self.E.T[None], "Ep": self.Ep.T[None],
            "Sv": self.Sv.T[None], "Pv": self.Pv.T[None],
        }
        # transposed views share memory with the instance arrays
        for pos in range(lo, hi + 1):
            self.engine.step_filter(state, pos, mean_b[pos - lo], vol_b[pos - lo],
                                    self.panel.speed[pos], self.panel.power[pos])
        self.covered_through = hi

    def _window(self, origin: int, horizon: int, n_paths: int):
        trim = self.model.trim
        if origin - trim + 1 < self.start:
            raise ForecastError(
                f"origin {origin} leaves less than {trim} rows of covered history"
            )
        if origin >= self.panel.n:
            raise ForecastError("origin beyond the panel")
        self.ensure_state(origin)
        lo = origin - trim + 1
        T = trim + horizon
        d = self.panel.d

        def window(arr2d):
            out = np.empty((n_paths, d, T))
            out[:, :, :trim] = arr2d[lo:origin + 1].T
            out[:, :, trim:] = 0.0
            return out

        state = {
            "W": window(self.panel.speed), "P": window(self.panel.power),
            "E": window(self.E), "Ep": window(self.Ep),
            "Sv": window(self.Sv), "Pv": window(self.Pv),
        }
        ts_future = (self.panel.timestamps[origin]
                     + STEP_SECONDS * np.arange(1, horizon + 1))
        mean_b, vol_b = self.engine.basis_rows(ts_future)
        return state, mean_b, vol_b

    # -- forecasts --------------------------------------------------------

    def point(self, origin: int, horizon: int) -> ForecastResult:
        """Plug-in recursion with future shocks at zero."""
        state, mean_b, vol_b = self._window(origin, horizon, 1)
        trim = self.model.trim
        zero = np.zeros((1, self.panel.d))
        for s in range(horizon):
            self.engine.step_mean(state, trim + s, mean_b[s], zero, zero)
        return ForecastResult(
            origin_index=origin,
            origin_timestamp=int(self.panel.timestamps[origin]),
            horizon=horizon,
            labels=self.panel.labels,
            speed_point=state["W"][0, :, trim:].T.copy(),
            power_point=state["P"][0, :, trim:].T.copy(),
        )

    def bootstrap(self, origin: int, horizon: int, n_paths: int = 1000,
                  seed: int = 0) -> ForecastResult:
        """Joint sample paths from resampled standardized residual rows."""
        model = self.model
        pool_m = model.speed_pool.shape[0]
        if pool_m == 0:
            raise ForecastError("empty standardized residual pool")
        if n_paths < 100:
            warnings.warn(f"n_paths={n_paths} < 100: quantiles will be noisy")
        draws = np.empty((n_paths, horizon), dtype=np.int64)
        for p in range(n_paths):
            rng = np.random.Generator(np.random.Philox(key=np.array([seed, p],
                                                                    dtype=np.uint64)))
            draws[p] = rng.integers(0, pool_m, size=horizon)
        state, mean_b, vol_b = self._window(origin, horizon, n_paths)
        trim = model.trim
        for s in range(horizon):
            pos = trim + s
            self.engine.step_vol(state, pos, vol_b[s])
            z = model.speed_pool[draws[:, s]]  # (n_paths, d), jointly drawn rows
            u = model.power_pool[draws[:, s]]
            speed_shock = state["Sv"][:, :, pos] * z
            power_shock = state["Pv"][:, :, pos] ** 3 * u
            self.engine.step_mean(state, pos, mean_b[s], speed_shock, power_shock)
        w_paths = state["W"][:, :, trim:]  # (n_paths, d, horizon)
        p_paths = state["P"][:, :, trim:]
        idx = np.ceil(PERCENTILES / 100.0 * n_paths).astype(int) - 1
        w_sorted = np.sort(w_paths, axis=0)
        p_sorted = np.sort(p_paths, axis=0)
        return ForecastResult(
            origin_index=origin,
            origin_timestamp=int(self.panel.timestamps[origin]),
            horizon=horizon,
            labels=self.panel.labels,
            speed_point=w_paths.mean(axis=0).T.copy(),
            power_point=p_paths.mean(axis=0).T.copy(),
            speed_quantiles=w_sorted[idx].transpose(2, 1, 0),
            power_quantiles=p_sorted[idx].transpose(2, 1, 0),
            n_paths=n_paths,
            seed=seed,
        )


def point_forecast(model: FittedJointModel, panel: TurbinePanel, origin: int,
                   horizon: int = 288) -> ForecastResult:
    return Forecaster(model, panel).point(origin, horizon)


def bootstrap_forecast(model: FittedJointModel, panel: TurbinePanel, origin: int,
                       horizon: int = 288, n_paths: int = 1000,
                       seed: int = 0) -> ForecastResult:
    return Forecaster(model, panel).bootstrap(origin, horizon, n_paths, seed)


# ---------------------------------------------------------------------------
# synthetic generation from known coefficients


class _SyntheticModel:
    """Minimal stand-in carrying what _Engine needs for a true-model run."""

    def __init__(self, labels, diurnal, annual, anchor_epoch, terms):
        self.labels = tuple(labels)
        self.diurnal = diurnal
        self.annual = annual
        self.anchor_epoch = anchor_epoch
        self.terms = terms
        self.d = len(self.labels)
        self.speed_floors = np.zeros(self.d)
        self.power_floors = np.zeros(self.d)


def simulate_synthetic(config, true_coefficients: dict, n: int, seed: int,
                       labels=("T1", "T2"), start_epoch: int = 1288569600,
                       burn_in: int = 1000) -> TurbinePanel:
    """Simulate the joint recursions forward from flat initial conditions
    with Gaussian standardized innovations, discarding ``burn_in`` steps.

    ``true_coefficients`` maps (equation, turbine) to Term lists; the
    volatility terms drive the true conditional scales directly. ``config``
    supplies the basis specs used for any time-varying coefficients.
    """
    d = len(labels)
    model = _SyntheticModel(labels, config.diurnal, config.annual,
                            _anchor_for(start_epoch), true_coefficients)
    engine = _Engine(model)
    total = burn_in + n
    lead = 160  # flat pre-history so max-lag reads stay in bounds
    ts = start_epoch + STEP_SECONDS * (np.arange(total + lead) - burn_in - lead)
    mean_b, vol_b = engine.basis_rows(ts)
    T = total + lead
    state = {k: np.zeros((1, d, T)) for k in ("W", "P", "E", "Ep", "Sv", "Pv")}
    state["Sv"][:] = 1.0
    state["Pv"][:] = 1.0
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    z = rng.standard_normal((T, d))
    u = rng.standard_normal((T, d))
    for pos in range(lead, T):
        engine.step_vol(state, pos, vol_b[pos])
        speed_shock = state["Sv"][:, :, pos] * z[pos]
        power_shock = state["Pv"][:, :, pos] ** 3 * u[pos]
        engine.step_mean(state, pos, mean_b[pos], speed_shock, power_shock)
        if (np.abs(state["W"][0, :, pos]).max() > 1e9
                or np.abs(state["P"][0, :, pos]).max() > 1e9):
            raise ForecastError(f"unstable recursion at step {pos - lead}")
    keep = slice(T - n, T)
    return TurbinePanel(
        timestamps=ts[keep],
        speed=state["W"][0, :, keep].T.copy(),
        power=state["P"][0, :, keep].T.copy(),
        labels=labels,
        speed_mask=np.zeros((n, d), dtype=bool),
        power_mask=np.zeros((n, d), dtype=bool),
    )


def _anchor_for(epoch: int) -> int:
    from datetime import datetime, timezone

    first = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return int(datetime(first.year, 1, 1, tzinfo=timezone.utc).timestamp())
