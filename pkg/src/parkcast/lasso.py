"""Weighted (optionally nonnegative) lasso via coordinate descent, BIC-tuned.

The objective is exactly

    f(b) = (y - X b)' diag(w) (y - X b) + lambda * sum_j penalized_j |b_j|

on the raw coefficient scale. Columns are rescaled to unit weighted norm
internally for the sweeps (per-coordinate thresholds carry the scale back),
and returned coefficients are on the raw scale. Nonnegative problems clamp
every update at zero, which keeps volatility recursions well defined.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

_OBJ_SLACK = 1e-12  # float roundoff allowance for the monotonicity assertion


class DegenerateGridError(ValueError):
    """No usable penalty grid (e.g. all-zero response)."""


class LassoConvergenceWarning(UserWarning):
    pass


@dataclass
class LassoProblem:
    """One weighted lasso regression.

    ``weights`` holds the diagonal heteroscedasticity weights (all ones for
    the volatility regressions); ``penalize_mask`` marks which coefficients
    the L1 term applies to (the single constant basis column is exempt).
    """

    response: np.ndarray
    design: np.ndarray
    weights: np.ndarray | None = None
    nonnegative: bool = False
    penalize_mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.response = np.asarray(self.response, dtype=float)
        self.design = np.asarray(self.design, dtype=float)
        m = self.response.shape[0]
        if self.design.ndim != 2 or self.design.shape[0] != m:
            raise ValueError("design must be (m, p) aligned with the response")
        if m == 0 or self.design.shape[1] == 0:
            raise ValueError("empty problem")
        if self.weights is None:
            self.weights = np.ones(m)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (m,):
                raise ValueError("weights must be length m")
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
                raise ValueError("weights must be positive and finite")
        if self.penalize_mask is None:
            self.penalize_mask = np.ones(self.design.shape[1], dtype=bool)
        else:
            self.penalize_mask = np.asarray(self.penalize_mask, dtype=bool)
            if self.penalize_mask.shape != (self.design.shape[1],):
                raise ValueError("penalize_mask must be length p")

    @property
    def m(self) -> int:
        return self.response.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


@dataclass
class LassoFit:
    """Solution path with its BIC trace and the selected model."""

    lambdas: np.ndarray
    coef_path: np.ndarray  # (n_lambda, p), raw scale
    bic_path: np.ndarray
    selected_index: int
    sweeps: np.ndarray
    converged: np.ndarray
    objective: float
    zero_rss: bool = False
    kkt_max: float = float("nan")  # residual at the selected solution

    @property
    def selected_lambda(self) -> float:
        return float(self.lambdas[self.selected_index])

    @property
    def coefficients(self) -> np.ndarray:
        return self.coef_path[self.selected_index]


def soft_threshold(z, g):
    """sign(z) * max(|z| - g, 0); g = 0 is the identity."""
    return np.sign(z) * np.maximum(np.abs(z) - g, 0.0)


def objective_value(problem: LassoProblem, coefficients: np.ndarray, lam: float) -> float:
    r = problem.response - problem.design @ coefficients
    rss = float(np.dot(problem.weights * r, r))
    pen = float(np.abs(coefficients[problem.penalize_mask]).sum())
    return rss + lam * pen


class _Work:
    """Standardized view of a problem shared across a path fit.

    Zero-norm columns and exact duplicates of earlier columns are excluded
    from the sweeps (their coefficients stay 0). Uses precomputed Gram
    products when that is cheaper than residual updates.
    """

    def __init__(self, problem: LassoProblem):
        self.problem = problem
        X, w, y = problem.design, problem.weights, problem.response
        m, p = problem.m, problem.p
        self.scale = np.sqrt(np.einsum("ij,ij->j", X * w[:, None], X))
        usable = self.scale > 0
        seen: dict[bytes, int] = {}
        for j in range(p):
            if not usable[j]:
                continue
            key = X[:, j].tobytes()
            if key in seen:
                usable[j] = False
            else:
                seen[key] = j
        self.usable = usable
        self.cols = np.flatnonzero(usable)
        s = self.scale[self.cols]
        self.Xs = X[:, self.cols] / s
        self.c = (w * y) @ self.Xs
        self.yy = float(np.dot(w * y, y))
        # per-coordinate threshold back on the raw-objective scale
        self.pen_scale = np.where(problem.penalize_mask[self.cols], 1.0 / s, 0.0)
        k = self.cols.size
        # Gram construction is a one-off BLAS product; it pays for itself
        # unless the matrix is huge or there are more columns than rows help
        self.use_gram = 0 < k <= 2500 and m * k * k <= 4e10 and m >= k
        if self.use_gram:
            self.G = self.Xs.T @ (w[:, None] * self.Xs)
        else:
            self.w = w

    def full_coefficients(self, b_std: np.ndarray) -> np.ndarray:
        out = np.zeros(self.problem.p)
        out[self.cols] = b_std / self.scale[self.cols]
        return out


def _shrink(z: float, g: float, nonneg: bool) -> float:
    if nonneg:
        return z - g if z > g else 0.0
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


def _gram_sweeps_py(G, c, gb, b, pen_scale, order, half, nonneg, tol,
                    max_iter, rss, pen, slack):
    """Up to ``max_iter`` cyclic sweeps over ``order`` with incremental
    objective tracking (unit-norm columns make the RSS update O(1)).
    Returns (sweeps, last max delta, rss, pen, monotonicity violation)."""
    sweeps = 0
    delta_max = tol
    while sweeps < max_iter and delta_max >= tol:
        obj_prev = rss + 2.0 * half * pen
        delta_max = 0.0
        for j in order:
            z = c[j] - gb[j] + b[j]
            new = _shrink(z, half * pen_scale[j], nonneg)
            delta = new - b[j]
            if delta != 0.0:
                rss += delta * (delta - 2.0 * (z - b[j]))
                pen += pen_scale[j] * (abs(new) - abs(b[j]))
                gb += G[j] * delta  # G symmetric, row access contiguous
                b[j] = new
                if abs(delta) > delta_max:
                    delta_max = abs(delta)
        sweeps += 1
        if rss + 2.0 * half * pen > obj_prev + slack:
            return sweeps, delta_max, rss, pen, True
    return sweeps, delta_max, rss, pen, False


def _resid_sweeps_py(Xs, w, r, b, pen_scale, order, half, nonneg, tol,
                     max_iter, rss, pen, slack):
    sweeps = 0
    delta_max = tol
    while sweeps < max_iter and delta_max >= tol:
        obj_prev = rss + 2.0 * half * pen
        delta_max = 0.0
        for j in order:
            z = np.dot(w * Xs[:, j], r) + b[j]
            new = _shrink(z, half * pen_scale[j], nonneg)
            delta = new - b[j]
            if delta != 0.0:
                rss += delta * (delta - 2.0 * (z - b[j]))
                pen += pen_scale[j] * (abs(new) - abs(b[j]))
                r -= Xs[:, j] * delta
                b[j] = new
                if abs(delta) > delta_max:
                    delta_max = abs(delta)
        sweeps += 1
        if rss + 2.0 * half * pen > obj_prev + slack:
            return sweeps, delta_max, rss, pen, True
    return sweeps, delta_max, rss, pen, False


try:  # compiled sweeps (the numpy versions above stay as the fallback)
    from numba import njit

    @njit(cache=True)
    def _gram_sweeps(G, c, gb, b, pen_scale, order, half, nonneg, tol,
                     max_iter, rss, pen, slack):
        k = gb.shape[0]
        sweeps = 0
        delta_max = tol
        while sweeps < max_iter and delta_max >= tol:
            obj_prev = rss + 2.0 * half * pen
            delta_max = 0.0
            for oi in range(order.shape[0]):
                j = order[oi]
                z = c[j] - gb[j] + b[j]
                g = half * pen_scale[j]
                if nonneg:
                    new = z - g if z > g else 0.0
                elif z > g:
                    new = z - g
                elif z < -g:
                    new = z + g
                else:
                    new = 0.0
                delta = new - b[j]
                if delta != 0.0:
                    rss += delta * (delta - 2.0 * (z - b[j]))
                    pen += pen_scale[j] * (abs(new) - abs(b[j]))
                    for l in range(k):
                        gb[l] += G[j, l] * delta
                    b[j] = new
                    if abs(delta) > delta_max:
                        delta_max = abs(delta)
            sweeps += 1
            if rss + 2.0 * half * pen > obj_prev + slack:
                return sweeps, delta_max, rss, pen, True
        return sweeps, delta_max, rss, pen, False

    @njit(cache=True)
    def _resid_sweeps(Xs, w, r, b, pen_scale, order, half, nonneg, tol,
                      max_iter, rss, pen, slack):
        m = r.shape[0]
        sweeps = 0
        delta_max = tol
        while sweeps < max_iter and delta_max >= tol:
            obj_prev = rss + 2.0 * half * pen
            delta_max = 0.0
            for oi in range(order.shape[0]):
                j = order[oi]
                z = b[j]
                for t in range(m):
                    z += Xs[t, j] * w[t] * r[t]
                g = half * pen_scale[j]
                if nonneg:
                    new = z - g if z > g else 0.0
                elif z > g:
                    new = z - g
                elif z < -g:
                    new = z + g
                else:
                    new = 0.0
                delta = new - b[j]
                if delta != 0.0:
                    rss += delta * (delta - 2.0 * (z - b[j]))
                    pen += pen_scale[j] * (abs(new) - abs(b[j]))
                    for t in range(m):
                        r[t] -= Xs[t, j] * delta
                    b[j] = new
                    if abs(delta) > delta_max:
                        delta_max = abs(delta)
            sweeps += 1
            if rss + 2.0 * half * pen > obj_prev + slack:
                return sweeps, delta_max, rss, pen, True
        return sweeps, delta_max, rss, pen, False

except ImportError:  # pragma: no cover - numba is a soft dependency
    _gram_sweeps = _gram_sweeps_py
    _resid_sweeps = _resid_sweeps_py


def _run_sweeps(work: _Work, b: np.ndarray, lam: float, order: np.ndarray,
                state, max_iter: int, tol: float, rss: float, pen: float,
                slack: float):
    """Dispatch a batch of sweeps; raises on an objective increase."""
    order = np.ascontiguousarray(order, dtype=np.int64)
    if work.use_gram:
        out = _gram_sweeps(work.G, work.c, state["gb"], b, work.pen_scale,
                           order, lam / 2.0, work.problem.nonnegative, tol,
                           max_iter, rss, pen, slack)
    else:
        out = _resid_sweeps(work.Xs, work.w, state["r"], b, work.pen_scale,
                            order, lam / 2.0, work.problem.nonnegative, tol,
                            max_iter, rss, pen, slack)
    sweeps, delta, rss, pen, violated = out
    if violated:
        raise AssertionError("objective increased within a sweep")
    return sweeps, delta, rss, pen


def _objective_std(work: _Work, b: np.ndarray, lam: float, state) -> float:
    if work.use_gram:
        rss = work.yy - 2.0 * float(np.dot(work.c, b)) + float(np.dot(b, state["gb"]))
    else:
        r = state["r"]
        rss = float(np.dot(work.problem.weights * r, r))
    return rss + lam * float(np.dot(work.pen_scale, np.abs(b)))


def _kkt_std(work: _Work, b: np.ndarray, lam: float, state) -> np.ndarray:
    """KKT residuals per usable coordinate, on the standardized scale."""
    if work.use_gram:
        grad = work.c - work.G @ b
    else:
        grad = (work.problem.weights * state["r"]) @ work.Xs
    g2 = 2.0 * grad
    thr = lam * work.pen_scale
    res = np.empty_like(g2)
    active = b != 0.0
    if work.problem.nonnegative:
        res[active] = np.abs(g2[active] - thr[active])
        res[~active] = np.maximum(g2[~active] - thr[~active], 0.0)
    else:
        res[active] = np.abs(g2[active] - thr[active] * np.sign(b[active]))
        res[~active] = np.maximum(np.abs(g2[~active]) - thr[~active], 0.0)
    return 0.5 * res  # residual of x'Wr against its target, unit-norm columns


def _refresh_state(work: _Work, b: np.ndarray, state: dict) -> None:
    if work.use_gram:
        state["gb"] = work.G @ b
    else:
        state["r"] = work.problem.response - work.Xs @ b


def _polish(work: _Work, b: np.ndarray, lam: float, state: dict,
            active: np.ndarray, obj: float, slack: float):
    """Solve the KKT equations exactly on the current active set (signs held
    fixed). Shares the sweeps' fixed point; accepted only when feasible and
    the objective does not increase. Returns the new objective or None."""
    signs = np.sign(b[active])
    if work.use_gram:
        gaa = work.G[np.ix_(active, active)]
    else:
        xa = work.Xs[:, active]
        gaa = xa.T @ (work.problem.weights[:, None] * xa)
    rhs = work.c[active] - 0.5 * lam * work.pen_scale[active] * signs
    try:
        sol = np.linalg.solve(gaa, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    if work.problem.nonnegative:
        if np.any(sol < 0.0):
            return None
    elif np.any(np.sign(sol) * signs < 0.0):
        return None
    b_try = b.copy()
    b_try[active] = sol
    trial: dict = {}
    _refresh_state(work, b_try, trial)
    new_obj = _objective_std(work, b_try, lam, trial)
    if new_obj > obj + slack:
        return None
    b[:] = b_try
    state.update(trial)
    return new_obj


def _rss_pen(work: _Work, b: np.ndarray, lam: float, state) -> tuple[float, float]:
    pen = float(np.dot(work.pen_scale, np.abs(b)))
    return _objective_std(work, b, lam, state) - lam * pen, pen


def _descend(
    work: _Work,
    lam: float,
    b: np.ndarray,
    tol: float,
    max_sweeps: int,
):
    """Run sweeps at one lambda from warm start ``b`` (standardized scale)."""
    state: dict = {}
    _refresh_state(work, b, state)
    all_order = np.arange(work.cols.size)
    # float-roundoff allowance for the quadratic form; genuine increases are
    # orders of magnitude larger
    slack = _OBJ_SLACK * (work.yy + 1.0)
    rss, pen = _rss_pen(work, b, lam, state)
    obj = rss + lam * pen
    sweeps = 0
    converged = False
    polished_key = b"-"
    check_obj, check_at = obj, 100
    while sweeps < max_sweeps:
        n_sw, delta, rss, pen = _run_sweeps(
            work, b, lam, all_order, state, 3, tol, rss, pen, slack)
        sweeps += n_sw
        obj = rss + lam * pen
        if delta < tol:
            if np.max(_kkt_std(work, b, lam, state), initial=0.0) <= 10.0 * tol:
                converged = True
            break  # a full pass moved nothing measurable; stop either way
        if sweeps >= check_at:
            # wandering in a near-flat valley: relative progress per 100
            # sweeps below 1e-9 cannot reach tol in any reasonable budget
            if check_obj - obj <= 1e-9 * (abs(obj) + 1.0):
                break
            check_obj, check_at = obj, sweeps + 100
        active = np.flatnonzero(b)
        key = active.tobytes()
        if key != polished_key and active.size:
            polished_key = key
            res = _polish(work, b, lam, state, active, obj, slack)
            if res is not None:
                rss, pen = _rss_pen(work, b, lam, state)
                obj = rss + lam * pen
                continue
        if active.size:
            n_sw, _, rss, pen = _run_sweeps(
                work, b, lam, active, state, 20, tol, rss, pen, slack)
            sweeps += n_sw
            obj = rss + lam * pen
    if not converged:
        warnings.warn(
            f"coordinate descent stopped without meeting tol={tol:g} at "
            f"lambda={lam:g} after {sweeps} sweeps",
            LassoConvergenceWarning,
        )
    # razor-edge activations far below the solver's own resolution are zero
    dust = (b != 0.0) & (np.abs(b) < 1e-3 * tol)
    if dust.any():
        b[dust] = 0.0
        _refresh_state(work, b, state)
    return b, sweeps, converged, objective_rss(work, b, state)


def objective_rss(work: _Work, b: np.ndarray, state) -> float:
    """Exact weighted RSS at ``b`` from the current state."""
    return _rss_pen(work, b, 0.0, state)[0]


def coordinate_descent(
    problem: LassoProblem,
    lam: float,
    warm_start: np.ndarray | None = None,
    tol: float = 1e-7,
    max_sweeps: int = 10_000,
) -> np.ndarray:
    """Solve one weighted lasso at penalty ``lam``; coefficients on raw scale."""
    work = _Work(problem)
    if warm_start is None:
        b = np.zeros(work.cols.size)
    else:
        ws = np.asarray(warm_start, dtype=float)
        b = ws[work.cols] * work.scale[work.cols]
    b, _, _, _ = _descend(work, lam, b, tol, max_sweeps)
    return work.full_coefficients(b)


def kkt_residuals(problem: LassoProblem, coefficients: np.ndarray, lam: float) -> np.ndarray:
    """Per-column KKT residuals on the standardized scale (0 for excluded
    columns); a solution is optimal iff these vanish."""
    work = _Work(problem)
    b_std = np.asarray(coefficients, dtype=float)[work.cols] * work.scale[work.cols]
    state: dict = {}
    if not work.use_gram:
        state["r"] = problem.response - work.Xs @ b_std
    out = np.zeros(problem.p)
    out[work.cols] = _kkt_std(work, b_std, lam, state)
    return out


def lambda_grid(problem: LassoProblem, count: int = 100, ratio: float = 1e-4) -> np.ndarray:
    """Descending log-spaced penalty grid.

    The top value is the smallest penalty at which every penalized
    coefficient is zero: twice the largest weighted inner product between a
    penalized column and the response residualized on the unpenalized
    columns.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    w, X, y = problem.weights, problem.design, problem.response
    unpen = ~problem.penalize_mask
    r = y
    if unpen.any():
        sw = np.sqrt(w)
        beta, *_ = np.linalg.lstsq(sw[:, None] * X[:, unpen], sw * y, rcond=None)
        r = y - X[:, unpen] @ beta
    pen = X[:, problem.penalize_mask]
    lam_max = 2.0 * float(np.max(np.abs((w * r) @ pen), initial=0.0))
    # Cauchy-Schwarz bound on the same inner products; a top value this far
    # below it is floating-point residue, not signal
    norms = np.sqrt(np.einsum("ij,ij->j", pen * w[:, None], pen))
    bound = 2.0 * float(np.max(norms, initial=0.0)) * np.sqrt(float(np.dot(w * y, y)))
    if not np.isfinite(lam_max) or lam_max <= 1e-10 * bound or lam_max <= 0.0:
        raise DegenerateGridError(
            "no usable penalty grid (response carries no penalizable signal)"
        )
    return np.geomspace(lam_max, lam_max * ratio, count)


def weighted_bic(problem: LassoProblem, coefficients: np.ndarray):
    """m log(RSS_w / m) + df log(m) with df = number of nonzero coefficients.

    A perfect fit (zero weighted RSS up to float roundoff) returns the
    (-inf, True) sentinel; callers must treat that as a flag, not a score.
    """
    m = problem.m
    r = problem.response - problem.design @ coefficients
    rss = float(np.dot(problem.weights * r, r))
    df = int(np.count_nonzero(coefficients))
    scale = float(np.dot(problem.weights * problem.response, problem.response))
    if rss <= 1e-20 * max(scale, 1.0):
        return -np.inf, True
    return m * np.log(rss / m) + df * np.log(m), False


@dataclass
class LassoSettings:
    grid_count: int = 100
    grid_ratio: float = 1e-4
    tol: float = 1e-7
    max_sweeps: int = 10_000


def fit_path_bic(problem: LassoProblem, settings: LassoSettings | None = None) -> LassoFit:
    """Warm-started descent along the descending grid; pick the BIC minimizer,
    breaking ties toward the larger penalty (sparser model)."""
    settings = settings or LassoSettings()
    lambdas = lambda_grid(problem, settings.grid_count, settings.grid_ratio)
    work = _Work(problem)
    nlam = lambdas.size
    coef_path = np.zeros((nlam, problem.p))
    bic_path = np.empty(nlam)
    sweeps = np.zeros(nlam, dtype=int)
    converged = np.zeros(nlam, dtype=bool)
    zero_rss = False
    b = np.zeros(work.cols.size)
    m = problem.m
    rss_floor = 1e-20 * max(work.yy, 1.0)
    for li, lam in enumerate(lambdas):
        b, n_sw, ok, rss = _descend(work, lam, b, settings.tol, settings.max_sweeps)
        coef_path[li] = work.full_coefficients(b)
        sweeps[li] = n_sw
        converged[li] = ok
        df = int(np.count_nonzero(b))
        if rss <= rss_floor:
            bic_path[li] = -np.inf
            zero_rss = True
        else:
            bic_path[li] = m * np.log(rss / m) + df * np.log(m)
    selected = int(np.argmin(bic_path))  # first occurrence = largest lambda
    objective = objective_value(problem, coef_path[selected], float(lambdas[selected]))
    kkt_max = float(np.max(kkt_residuals(problem, coef_path[selected],
                                         float(lambdas[selected])), initial=0.0))
    return LassoFit(
        lambdas=lambdas,
        coef_path=coef_path,
        bic_path=bic_path,
        selected_index=selected,
        sweeps=sweeps,
        converged=converged,
        objective=objective,
        zero_rss=zero_rss,
        kkt_max=kkt_max,
    )
