"""Reference forecasters: persistence, Yule-Walker AR/BVAR/VAR, ARMA(1,1)
by conditional Gaussian likelihood, and the dynamic-regression power curve
models (plain least squares and its two-sided censored generalization).

Every benchmark registers under a string id and exposes the same adapter
surface as the joint model for the backtest harness: ``fit(panel, end_row)``
then ``forecast_power(panel, origin, horizons) -> (len(horizons), d)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal
from scipy.special import log_ndtr, ndtr

from .panel import CalendarIndex, TurbinePanel


class BenchmarkError(Exception):
    pass


# ---------------------------------------------------------------------------
# Yule-Walker vector autoregressions


@dataclass
class VarFit:
    kind: str
    order: int
    coefs: np.ndarray  # (order, m, m)
    mean: np.ndarray  # (m,)
    sigma: np.ndarray  # innovation covariance
    aic: np.ndarray  # per candidate order 0..max_order
    stationary: bool = True


def _autocov(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocovariance matrices of the centered series, lags 0..max_lag."""
    n, m = x.shape
    out = np.empty((max_lag + 1, m, m))
    for h in range(max_lag + 1):
        out[h] = x[h:].T @ x[: n - h] / n
    return out


def _yw_solve(gam: np.ndarray, p: int) -> np.ndarray:
    m = gam.shape[1]
    big = np.empty((p * m, p * m))
    for r in range(p):
        for c in range(p):
            h = r - c
            big[r * m : (r + 1) * m, c * m : (c + 1) * m] = (
                gam[h] if h >= 0 else gam[-h].T
            )
    rhs = np.hstack([gam[k + 1] for k in range(p)])  # (m, p*m)
    try:
        sol = np.linalg.solve(big.T, rhs.T).T
    except np.linalg.LinAlgError:
        warnings.warn("singular Yule-Walker system; ridge-regularized")
        ridge = 1e-10 * np.trace(big) / big.shape[0] + 1e-300
        sol = np.linalg.solve(big.T + ridge * np.eye(big.shape[0]), rhs.T).T
    return sol.reshape(m, p, m).swapaxes(0, 1)  # (p, m, m)


def _companion_radius(coefs: np.ndarray) -> float:
    p, m, _ = coefs.shape
    comp = np.zeros((p * m, p * m))
    comp[:m] = np.concatenate(list(coefs), axis=1)
    if p > 1:
        comp[m:, : (p - 1) * m] = np.eye((p - 1) * m)
    return float(np.max(np.abs(np.linalg.eigvals(comp)))) if p * m else 0.0


def fit_ar_yule_walker(series: np.ndarray, max_order: int = 20) -> VarFit:
    """Yule-Walker VAR fit at the AIC-minimizing order (univariate series are
    a one-column special case). The series is demeaned internally; the mean
    is re-added at forecast time."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, m = x.shape
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if n <= 2 * max_order + m:
        raise BenchmarkError("series too short for the requested order")
    mean = x.mean(axis=0)
    xc = x - mean
    gam = _autocov(xc, max_order)
    n_eff = n - max_order
    aic = np.empty(max_order + 1)
    fits: list[np.ndarray | None] = [None] * (max_order + 1)
    for p in range(max_order + 1):
        if p == 0:
            resid = xc[max_order:]
        else:
            a = _yw_solve(gam, p)
            fits[p] = a
            pred = np.zeros((n_eff, m))
            for k in range(1, p + 1):
                pred += xc[max_order - k : n - k] @ a[k - 1].T
            resid = xc[max_order:] - pred
        sigma = resid.T @ resid / n_eff
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            aic[p] = np.inf
            continue
        aic[p] = n_eff * logdet + 2.0 * p * m * m
    best = int(np.argmin(aic))
    if best == 0:
        coefs = np.zeros((0, m, m))
        resid = xc[max_order:]
    else:
        coefs = fits[best]
        pred = np.zeros((n_eff, m))
        for k in range(1, best + 1):
            pred += xc[max_order - k : n - k] @ coefs[k - 1].T
        resid = xc[max_order:] - pred
    radius = _companion_radius(coefs) if best else 0.0
    stationary = radius < 1.0
    if not stationary:
        warnings.warn(f"Yule-Walker fit with companion radius {radius:.4f}")
    return VarFit(
        kind="var" if m > 1 else "ar",
        order=best,
        coefs=coefs,
        mean=mean,
        sigma=resid.T @ resid / n_eff,
        aic=aic,
        stationary=stationary,
    )


def var_forecast(fit: VarFit, history: np.ndarray, horizon: int) -> np.ndarray:
    """Iterated forecasts; ``history`` holds the most recent rows (last row =
    forecast origin). Returns (horizon, m)."""
    history = np.asarray(history, dtype=float)
    if history.ndim == 1:
        history = history[:, None]
    h = history - fit.mean
    p = fit.order
    if p and h.shape[0] < p:
        raise BenchmarkError(f"need {p} rows of history, got {h.shape[0]}")
    buf = list(h[-p:]) if p else []
    out = np.empty((horizon, fit.mean.size))
    for s in range(horizon):
        nxt = np.zeros(fit.mean.size)
        for k in range(1, p + 1):
            nxt += fit.coefs[k - 1] @ buf[-k]
        out[s] = nxt
        if p:
            buf.append(nxt)
            buf = buf[-p:]
    return out + fit.mean


# ---------------------------------------------------------------------------
# ARMA(1,1) by conditional Gaussian likelihood


@dataclass
class Arma11Fit:
    kind: str
    ar: float
    ma: float
    mean: float
    sigma2: float
    boundary: bool = False


def _arma11_profiled(y: np.ndarray, phi: float, theta: float):
    """Exact profile of the mean for fixed (phi, theta) with zero-initialized
    innovations; returns (mu, sse, e_base, b) for reuse."""
    u = y[1:] - phi * y[:-1]
    a = signal.lfilter([1.0], [1.0, theta], u)
    b = signal.lfilter([1.0], [1.0, theta], np.full(u.size, 1.0 - phi))
    denom = float(np.dot(b, b))
    mu = float(np.dot(a, b) / denom) if denom > 0 else float(y.mean())
    e = a - mu * b
    return mu, float(np.dot(e, e)), e


def fit_arma11_mle(series) -> Arma11Fit:
    """Maximize the conditional Gaussian likelihood over (ar, ma) in
    (-1, 1)^2; mean and innovation variance are profiled out exactly."""
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < 100:
        raise BenchmarkError(f"need at least 100 observations, got {n}")
    if np.std(y) == 0.0:
        raise BenchmarkError("constant series")

    def nll(params):
        phi, theta = params
        _, sse, _ = _arma11_profiled(y, phi, theta)
        return (n - 1) * np.log(max(sse / (n - 1), 1e-300))

    best = None
    for x0 in ((0.5, 0.0), (0.9, -0.3), (0.0, 0.5)):
        res = optimize.minimize(nll, x0, method="L-BFGS-B",
                                bounds=[(-0.999, 0.999)] * 2)
        if best is None or res.fun < best.fun:
            best = res
    phi, theta = best.x
    mu, sse, _ = _arma11_profiled(y, phi, theta)
    boundary = bool(max(abs(phi), abs(theta)) > 0.995)
    if boundary:
        warnings.warn("ARMA(1,1) estimate at the stationarity boundary")
    return Arma11Fit("arma11", float(phi), float(theta), mu,
                     sse / (n - 1), boundary)


def arma11_forecast(fit: Arma11Fit, history: np.ndarray, horizon: int) -> np.ndarray:
    y = np.asarray(history, dtype=float)
    # innovations under the fitted parameters, zero-initialized
    u = (y[1:] - fit.mean) - fit.ar * (y[:-1] - fit.mean)
    e = signal.lfilter([1.0], [1.0, fit.ma], u)
    one = fit.mean + fit.ar * (y[-1] - fit.mean) + fit.ma * e[-1]
    out = np.empty(horizon)
    out[0] = one
    for s in range(1, horizon):
        out[s] = fit.mean + fit.ar * (out[s - 1] - fit.mean)
    return out


# ---------------------------------------------------------------------------
# dynamic power-curve regressions


def persistence_forecast(panel: TurbinePanel, origin: int, horizon: int) -> np.ndarray:
    """Carry the origin's power forward to every horizon: (horizon, d)."""
    return np.tile(panel.power[origin], (horizon, 1))


def _fourier(day_index) -> np.ndarray:
    """The four diurnal Fourier regressors of the power-curve models; the
    time-of-day argument is in 10-minute units (period 144)."""
    ang = 2.0 * np.pi * np.asarray(day_index, dtype=float) / 144.0
    return np.column_stack([np.cos(ang), np.cos(2 * ang), np.sin(ang), np.sin(2 * ang)])


def _wppt_matrix(panel: TurbinePanel, rows: np.ndarray, turbine: int, k: int,
                 tod: np.ndarray, speed_pred=None,
                 extra: np.ndarray | None = None) -> np.ndarray:
    """Regressors at origins ``rows`` for horizon k: intercept, power at t and
    t-1, predicted speed at t+k and its square, diurnal Fourier terms, plus
    any extra per-row columns (e.g. wind direction where available)."""
    P = panel.power[:, turbine]
    if speed_pred is None:
        w = panel.speed[rows, turbine]  # persistence of observed speed
    else:
        w = speed_pred(panel, rows, turbine, k)
    day = (tod[rows] + k) % 144
    cols = [np.ones(rows.size), P[rows], P[rows - 1], w, w * w, _fourier(day)]
    if extra is not None:
        extra = np.asarray(extra, dtype=float)
        if extra.ndim == 1:
            extra = extra[:, None]
        cols.append(extra[rows])
    return np.column_stack(cols)


@dataclass
class WpptFit:
    kind: str
    turbine: int
    horizon: int
    coefs: np.ndarray  # 9 values


def fit_wppt(panel: TurbinePanel, turbine: int, k: int, end_row: int | None = None,
             speed_pred=None, tod: np.ndarray | None = None) -> WpptFit:
    """Per-horizon direct least squares on the 9-regressor power-curve model."""
    end = panel.n if end_row is None else end_row
    rows = np.arange(1, end - k)
    if rows.size < 20:
        raise BenchmarkError("too few rows to fit")
    if tod is None:
        tod = CalendarIndex.from_timestamps(panel.timestamps).time_of_day
    X = _wppt_matrix(panel, rows, turbine, k, tod, speed_pred)
    y = panel.power[rows + k, turbine]
    coefs, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise BenchmarkError(f"rank-deficient regressor matrix (rank {rank})")
    return WpptFit("wppt", turbine, k, coefs)


def wppt_forecast(fit: WpptFit, panel: TurbinePanel, origin: int,
                  speed_pred=None, tod: np.ndarray | None = None) -> float:
    if tod is None:
        tod = CalendarIndex.from_timestamps(panel.timestamps).time_of_day
    x = _wppt_matrix(panel, np.array([origin]), fit.turbine, fit.horizon, tod,
                     speed_pred)
    return float(x @ fit.coefs)


@dataclass
class GwpptFit:
    kind: str
    turbine: int
    horizon: int
    coefs: np.ndarray
    sigma: float
    lower: float
    upper: float
    converged: bool = True


def _tobit_negloglik(params, X, y, lower, upper, is_left, is_right, is_mid):
    beta, log_sigma = params[:-1], params[-1]
    sigma = np.exp(log_sigma)
    xb = X @ beta
    nll = 0.0
    grad_b = np.zeros(beta.size)
    grad_s = 0.0
    if is_mid.any():
        z = (y[is_mid] - xb[is_mid]) / sigma
        nll += float(0.5 * np.dot(z, z)) + is_mid.sum() * log_sigma
        grad_b += -(X[is_mid].T @ z) / sigma
        grad_s += float(is_mid.sum() - np.dot(z, z))
    for flag, point, sign in ((is_left, lower, 1.0), (is_right, upper, -1.0)):
        if not flag.any():
            continue
        a = sign * (point - xb[flag]) / sigma
        nll -= float(np.sum(log_ndtr(a)))
        mills = np.exp(-0.5 * a * a - 0.5 * np.log(2 * np.pi) - log_ndtr(a))
        grad_b += sign * (X[flag].T @ mills) / sigma
        grad_s += float(np.dot(mills, a))
    return nll, np.append(grad_b, grad_s)


def fit_gwppt(panel: TurbinePanel, turbine: int, k: int, lower: float = 0.0,
              upper: float = 1500.0, end_row: int | None = None,
              speed_pred=None, tod: np.ndarray | None = None) -> GwpptFit:
    """Two-sided censored (Tobit) maximum likelihood on the power-curve
    regressor set: observations at or outside the power range are treated as
    censored at the range bounds."""
    if not lower < upper:
        raise ValueError("need lower < upper")
    end = panel.n if end_row is None else end_row
    rows = np.arange(1, end - k)
    if rows.size < 20:
        raise BenchmarkError("too few rows to fit")
    if tod is None:
        tod = CalendarIndex.from_timestamps(panel.timestamps).time_of_day
    X = _wppt_matrix(panel, rows, turbine, k, tod, speed_pred)
    y = panel.power[rows + k, turbine]
    is_left = y <= lower
    is_right = y >= upper
    is_mid = ~(is_left | is_right)
    beta0, *_ = np.linalg.lstsq(X, np.clip(y, lower, upper), rcond=None)
    resid = np.clip(y, lower, upper) - X @ beta0
    s0 = max(float(resid.std()), 1e-3)
    x0 = np.append(beta0, np.log(s0))
    res = optimize.minimize(
        _tobit_negloglik, x0, args=(X, y, lower, upper, is_left, is_right, is_mid),
        jac=True, method="L-BFGS-B",
        bounds=[(None, None)] * beta0.size + [(np.log(1e-6 * s0), None)],
    )
    if not res.success:
        warnings.warn(f"censored likelihood did not converge: {res.message}")
    return GwpptFit("gwppt", turbine, k, res.x[:-1], float(np.exp(res.x[-1])),
                    lower, upper, bool(res.success))


def censored_mean(latent: float, sigma: float, lower: float, upper: float) -> float:
    """Mean of the censored-normal variable clip(X, lower, upper) with
    X ~ N(latent, sigma^2); this is the forecast rule (the lower-bound mass
    term is included so the identity is exact for lower != 0)."""
    if sigma <= 0.0:
        return float(min(max(latent, lower), upper))
    f1 = (lower - latent) / sigma
    f2 = (upper - latent) / sigma
    pdf = lambda t: np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi)
    return float(
        (ndtr(f2) - ndtr(f1)) * latent
        + (pdf(f1) - pdf(f2)) * sigma
        + upper * (1.0 - ndtr(f2))
        + lower * ndtr(f1)
    )


def gwppt_forecast(fit: GwpptFit, panel: TurbinePanel, origin: int,
                   speed_pred=None, tod: np.ndarray | None = None) -> float:
    if tod is None:
        tod = CalendarIndex.from_timestamps(panel.timestamps).time_of_day
    x = _wppt_matrix(panel, np.array([origin]), fit.turbine, fit.horizon, tod,
                     speed_pred)
    latent = float(x @ fit.coefs)
    return censored_mean(latent, fit.sigma, fit.lower, fit.upper)


# ---------------------------------------------------------------------------
# backtest adapters


class PersistenceModel:
    id = "persistence"

    def fit(self, panel, end_row):
        return self

    def forecast_power(self, panel, origin, horizons):
        return np.tile(panel.power[origin], (len(horizons), 1))


class ArModel:
    id = "ar"

    def __init__(self, max_order: int = 20):
        self.max_order = max_order
        self.fits: list[VarFit] = []

    def fit(self, panel, end_row):
        self.fits = [
            fit_ar_yule_walker(panel.power[:end_row, i], self.max_order)
            for i in range(panel.d)
        ]
        return self

    def forecast_power(self, panel, origin, horizons):
        horizon = int(max(horizons))
        out = np.empty((len(horizons), panel.d))
        back = max(self.max_order, 1)
        for i, f in enumerate(self.fits):
            path = var_forecast(f, panel.power[origin - back + 1 : origin + 1, i : i + 1],
                                horizon)
            out[:, i] = path[np.asarray(horizons) - 1, 0]
        return out


class BvarModel:
    id = "bvar"

    def __init__(self, max_order: int = 20):
        self.max_order = max_order
        self.fits: list[VarFit] = []

    def fit(self, panel, end_row):
        self.fits = [
            fit_ar_yule_walker(
                np.column_stack([panel.speed[:end_row, i], panel.power[:end_row, i]]),
                self.max_order,
            )
            for i in range(panel.d)
        ]
        return self

    def forecast_power(self, panel, origin, horizons):
        horizon = int(max(horizons))
        out = np.empty((len(horizons), panel.d))
        back = max(self.max_order, 1)
        sl = slice(origin - back + 1, origin + 1)
        for i, f in enumerate(self.fits):
            hist = np.column_stack([panel.speed[sl, i], panel.power[sl, i]])
            path = var_forecast(f, hist, horizon)
            out[:, i] = path[np.asarray(horizons) - 1, 1]
        return out


class VarModel:
    id = "var"

    def __init__(self, max_order: int = 10):
        self.max_order = max_order
        self.fit_: VarFit | None = None

    def fit(self, panel, end_row):
        joint = np.hstack([panel.speed[:end_row], panel.power[:end_row]])
        self.fit_ = fit_ar_yule_walker(joint, self.max_order)
        return self

    def forecast_power(self, panel, origin, horizons):
        horizon = int(max(horizons))
        back = max(self.max_order, 1)
        sl = slice(origin - back + 1, origin + 1)
        hist = np.hstack([panel.speed[sl], panel.power[sl]])
        path = var_forecast(self.fit_, hist, horizon)
        return path[np.asarray(horizons) - 1, panel.d :]


class Arma11Model:
    id = "arma11"

    def __init__(self):
        self.fits: list[Arma11Fit] = []

    def fit(self, panel, end_row):
        self.fits = [fit_arma11_mle(panel.power[:end_row, i]) for i in range(panel.d)]
        return self

    def forecast_power(self, panel, origin, horizons):
        horizon = int(max(horizons))
        out = np.empty((len(horizons), panel.d))
        back = min(origin + 1, 2000)  # innovation recursion forgets quickly
        for i, f in enumerate(self.fits):
            path = arma11_forecast(f, panel.power[origin - back + 1 : origin + 1, i],
                                   horizon)
            out[:, i] = path[np.asarray(horizons) - 1]
        return out


class WpptModel:
    id = "wppt"

    def __init__(self, speed_pred=None):
        self.speed_pred = speed_pred
        self.end_row = None
        self._cache: dict[tuple[int, int], WpptFit] = {}
        self._tod = None

    def fit(self, panel, end_row):
        self.end_row = end_row
        self._cache.clear()
        self._tod = CalendarIndex.from_timestamps(panel.timestamps).time_of_day
        return self

    def _get(self, panel, turbine, k):
        key = (turbine, k)
        if key not in self._cache:
            self._cache[key] = fit_wppt(panel, turbine, k, self.end_row,
                                        self.speed_pred, self._tod)
        return self._cache[key]

    def forecast_power(self, panel, origin, horizons):
        out = np.empty((len(horizons), panel.d))
        for hi, k in enumerate(horizons):
            for i in range(panel.d):
                out[hi, i] = wppt_forecast(self._get(panel, i, int(k)), panel,
                                           origin, self.speed_pred, self._tod)
        return out


class GwpptModel:
    id = "gwppt"

    def __init__(self, lower: float = 0.0, upper: float = 1500.0, speed_pred=None):
        self.lower, self.upper = lower, upper
        self.speed_pred = speed_pred
        self.end_row = None
        self._cache: dict[tuple[int, int], GwpptFit] = {}
        self._tod = None

    def fit(self, panel, end_row):
        self.end_row = end_row
        self._cache.clear()
        self._tod = CalendarIndex.from_timestamps(panel.timestamps).time_of_day
        return self

    def _get(self, panel, turbine, k):
        key = (turbine, k)
        if key not in self._cache:
            self._cache[key] = fit_gwppt(panel, turbine, k, self.lower, self.upper,
                                         self.end_row, self.speed_pred, self._tod)
        return self._cache[key]

    def forecast_power(self, panel, origin, horizons):
        out = np.empty((len(horizons), panel.d))
        for hi, k in enumerate(horizons):
            for i in range(panel.d):
                out[hi, i] = gwppt_forecast(self._get(panel, i, int(k)), panel,
                                            origin, self.speed_pred, self._tod)
        return out


BENCHMARKS = {
    "persistence": PersistenceModel,
    "ar": ArModel,
    "bvar": BvarModel,
    "var": VarModel,
    "arma11": Arma11Model,
    "wppt": WpptModel,
    "gwppt": GwpptModel,
}


def make_benchmark(name: str, **kwargs):
    try:
        cls = BENCHMARKS[name]
    except KeyError:
        raise BenchmarkError(f"unknown benchmark {name!r}; "
                             f"known: {sorted(BENCHMARKS)}") from None
    return cls(**kwargs)
