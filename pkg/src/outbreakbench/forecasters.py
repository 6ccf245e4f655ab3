"""Statistical baseline forecasters with Gaussian predictive distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .core import BenchError, InsufficientDataError

VARIANCE_FLOOR = 1e-6

QUANTILE_LEVELS: tuple[float, ...] = (
    0.01, 0.025, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5,
    0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.975, 0.99,
)  # fmt: skip
MEDIAN_INDEX = QUANTILE_LEVELS.index(0.5)


def _z(q: float) -> float:
    return 0.0 if q == 0.5 else NormalDist().inv_cdf(q)


Z_SCORES = np.array([_z(q) for q in QUANTILE_LEVELS])


def check_levels(levels: Sequence[float]) -> tuple[float, ...]:
    levels = tuple(float(q) for q in levels)
    if len(levels) != 23:
        raise BenchError(f"expected 23 quantile levels, got {len(levels)}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise BenchError("quantile levels must be strictly increasing")
    if 0.5 not in levels or any(abs(a + b - 1.0) > 1e-12 for a, b in zip(levels, reversed(levels))):
        raise BenchError("quantile levels must be symmetric about 0.5")
    return levels


@dataclass(frozen=True)
class QuantileForecast:
    unique_id: str
    model: str
    issuance_week_index: int
    horizon: int
    values: tuple[float, ...]

    @property
    def median(self) -> float:
        return self.values[MEDIAN_INDEX]

    @property
    def target_index(self) -> int:
        return self.issuance_week_index + self.horizon

    def sort_key(self):
        return (self.unique_id, self.issuance_week_index, self.horizon, self.model)


@dataclass(frozen=True)
class FittedModel:
    """A fitted baseline: point path and Gaussian spread for any horizon.

    ``params`` holds the family's coefficients and final states; ``sigma2`` is
    the one-step residual variance (floored).
    """

    family: str
    params: dict = field(hash=False)
    sigma2: float
    transform: str = "none"
    aicc: float = math.nan

    def point_forecasts(self, h: int) -> np.ndarray:
        p = self.params
        steps = np.arange(1, h + 1)
        if self.family == "flat":
            return np.full(h, p["last"])
        if self.family in ("ses", "holt", "damped"):
            phi = p["phi"]
            damp = np.cumsum(phi**steps)
            return p["level"] + p["trend"] * damp
        if self.family == "ar":
            return _ar_points(p, h)
        raise BenchError(f"unknown model family {self.family!r}")

    def variance_multipliers(self, h: int) -> np.ndarray:
        """Var_k / sigma2 for k = 1..h."""
        p = self.params
        if self.family == "flat":
            return np.arange(1, h + 1, dtype=float)
        if self.family in ("ses", "holt", "damped"):
            j = np.arange(1, h)
            damp = np.cumsum(p["phi"] ** j) if h > 1 else np.zeros(0)
            c = p["alpha"] + p["beta"] * damp
            return 1.0 + np.concatenate([[0.0], np.cumsum(c**2)])
        if self.family == "ar":
            psi = _psi_weights(p, h)
            return np.cumsum(psi**2)
        raise BenchError(f"unknown model family {self.family!r}")

    def sigmas(self, h: int) -> np.ndarray:
        return np.sqrt(self.sigma2 * self.variance_multipliers(h))

    @property
    def label(self) -> str:
        if self.family == "ar":
            return f"ar(p={self.params['p']},d={self.params['d']})"
        return self.family


# --- flat -------------------------------------------------------------------


def fit_flat(history: Sequence[float]) -> FittedModel:
    y = np.asarray(history, dtype=float)
    if y.size < 2:
        raise InsufficientDataError("flat baseline needs at least 2 points")
    diffs = np.diff(y)
    var = float(np.var(diffs, ddof=1)) if diffs.size > 1 else 0.0
    return FittedModel("flat", {"last": float(y[-1])}, max(var, VARIANCE_FLOOR))


# --- exponential smoothing ----------------------------------------------------

_ALPHA_GRID = np.linspace(0.02, 0.98, 25)
_BETA_FRACTION_GRID = np.linspace(0.02, 0.98, 13)  # beta = alpha * fraction
_PHI_GRID = np.array([0.8, 0.85, 0.9, 0.95, 0.98])
_PHI_BOUNDS = (0.8, 0.98)
_EPS_PARAM = 1e-4
_ETS_STATES = {"ses": 1, "holt": 2, "damped": 2}
_ETS_SMOOTHING = {"ses": 1, "holt": 2, "damped": 3}


def aicc(sse: float, n: int, k: int) -> float:
    """Corrected AIC of a Gaussian fit; +inf when there are too few points."""
    if n - k - 1 <= 0:
        return math.inf
    sigma2 = max(sse / n, VARIANCE_FLOOR)
    return n * math.log(sigma2) + 2 * k + 2 * k * (k + 1) / (n - k - 1)


def _ets_rows(family: str):
    if family == "ses":
        a = _ALPHA_GRID
        return a, np.zeros_like(a), np.ones_like(a)
    if family == "holt":
        a, f = np.meshgrid(_ALPHA_GRID, _BETA_FRACTION_GRID, indexing="ij")
        return a.ravel(), (a * f).ravel(), np.ones(a.size)
    a, f, ph = np.meshgrid(_ALPHA_GRID, _BETA_FRACTION_GRID, _PHI_GRID, indexing="ij")
    return a.ravel(), (a * f).ravel(), ph.ravel()


def _ets_unpack(family: str, theta) -> tuple[float, float, float]:
    alpha = float(theta[0])
    if family == "ses":
        return alpha, 0.0, 1.0
    beta = alpha * float(theta[1])
    phi = 1.0 if family == "holt" else float(theta[2])
    return alpha, beta, phi


def _fit_ets_family(y: np.ndarray, family: str):
    level0 = float(y[0])
    trend0 = 0.0 if family == "ses" else float(y[1] - y[0])
    alpha, beta, phi = _ets_rows(family)
    sse, _, _ = kernels.ets_sse_grid(y, alpha, beta, phi, level0, trend0)
    best = int(np.argmin(sse))

    theta0 = [alpha[best]]
    bounds = [(_EPS_PARAM, 1 - _EPS_PARAM)]
    if family != "ses":
        theta0.append(beta[best] / alpha[best])
        bounds.append((0.0, 1.0))
    if family == "damped":
        theta0.append(phi[best])
        bounds.append(_PHI_BOUNDS)

    def objective(theta):
        a, b, p = _ets_unpack(family, np.clip(theta, [lo for lo, _ in bounds], [hi for _, hi in bounds]))
        s, _, _ = kernels.ets_sse_grid(y, np.array([a]), np.array([b]), np.array([p]), level0, trend0)
        return float(s[0])

    res = minimize(
        objective,
        np.array(theta0),
        method="Nelder-Mead",
        bounds=bounds,
        options={"xatol": 1e-5, "fatol": 1e-10, "maxiter": 400},
    )
    theta = res.x if res.fun < sse[best] else np.array(theta0)
    a, b, p = _ets_unpack(family, theta)
    s, level, trend = kernels.ets_sse_grid(
        y, np.array([a]), np.array([b]), np.array([p]), level0, trend0
    )
    return a, b, p, float(s[0]), float(level[0]), float(trend[0])


def fit_ets(history: Sequence[float], families: Sequence[str] = ("ses", "holt", "damped")) -> FittedModel:
    """Fit SES, Holt and damped Holt by least squares and keep the lowest AICc."""
    y = np.asarray(history, dtype=float)
    if y.size < 8:
        raise InsufficientDataError("ETS needs at least 8 points")
    n_eff = y.size - 2  # errors scored from t=2 for every family
    best = None
    for family in families:
        a, b, p, sse, level, trend = _fit_ets_family(y, family)
        k = _ETS_SMOOTHING[family] + _ETS_STATES[family]
        score = aicc(sse, n_eff, k)
        if best is None or score < best[0]:
            best = (score, family, a, b, p, sse, level, trend)
    score, family, a, b, p, sse, level, trend = best
    params = {"alpha": a, "beta": b, "phi": p, "level": level, "trend": trend}
    return FittedModel(family, params, max(sse / n_eff, VARIANCE_FLOOR), aicc=score)


# --- autoregression on optionally differenced data ----------------------------


def _lagged_design(w: np.ndarray, p: int, rows: np.ndarray) -> np.ndarray:
    cols = [np.ones(rows.size)] + [w[rows - i] for i in range(1, p + 1)]
    return np.column_stack(cols)


def _ls_fit(w: np.ndarray, p: int, first_row: int):
    rows = np.arange(first_row, w.size)
    X = _lagged_design(w, p, rows)
    target = w[rows]
    coef, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    if rank < X.shape[1]:
        return None
    resid = target - X @ coef
    return coef, float(resid @ resid), rows.size


def fit_ar(
    history: Sequence[float],
    max_p: int = 5,
    d_values: Sequence[int] = (0, 1),
) -> FittedModel:
    """Least-squares AR(p) with intercept on the d-times differenced series.

    Orders are compared by AICc on a shared sample so that differenced and
    undifferenced candidates score the same target weeks. Ties go to the
    smaller p, then the smaller d.
    """
    y = np.asarray(history, dtype=float)
    if y.size < 8:
        raise InsufficientDataError("AR needs at least 8 points")
    d_max = max(d_values)

    # largest order cap that still leaves AICc defined on the shared sample
    cap = max_p
    while cap > 0 and (y.size - (d_max + cap)) - (cap + 2) - 1 < 1:
        cap -= 1
    start = d_max + cap

    candidates = []
    for d in d_values:
        w = np.diff(y, n=d) if d else y
        for p in range(cap + 1):
            fit = _ls_fit(w, p, start - d)
            if fit is None:
                continue
            _, sse, n = fit
            candidates.append((aicc(sse, n, p + 2), p, d))

    if candidates:
        score, p, d = min(candidates)
    else:
        score, p, d = math.nan, 0, 1
    w = np.diff(y, n=d) if d else y
    fit = _ls_fit(w, p, p)
    if fit is None:  # collinear lags in the refit: drift model
        p, d = 0, 1
        w = np.diff(y)
        fit = _ls_fit(w, 0, 0)
    coef, sse, n = fit
    params = {
        "p": p,
        "d": d,
        "intercept": float(coef[0]),
        "coefs": tuple(float(c) for c in coef[1:]),
        "tail": tuple(float(v) for v in y[-(p + d + 1) :]),
    }
    return FittedModel("ar", params, max(sse / n, VARIANCE_FLOOR), aicc=score)


def _ar_points(params: dict, h: int) -> np.ndarray:
    p, d = params["p"], params["d"]
    tail = np.asarray(params["tail"])
    w = list(np.diff(tail, n=d) if d else tail)
    level = tail[-1]
    out = np.empty(h)
    for k in range(h):
        nxt = params["intercept"] + sum(c * w[-i] for i, c in enumerate(params["coefs"], start=1))
        w.append(nxt)
        level = level + nxt if d else nxt
        out[k] = level
    return out


def _psi_weights(params: dict, h: int) -> np.ndarray:
    # level-scale AR polynomial: (1 - sum phi_i B^i)(1 - B)^d
    poly = np.concatenate([[1.0], -np.asarray(params["coefs"], dtype=float)])
    for _ in range(params["d"]):
        poly = np.convolve(poly, [1.0, -1.0])
    a = -poly[1:]
    psi = np.zeros(h)
    psi[0] = 1.0
    for j in range(1, h):
        m = min(j, a.size)
        psi[j] = sum(a[i - 1] * psi[j - i] for i in range(1, m + 1))
    return psi


# --- quantiles ----------------------------------------------------------------


def forecast_quantiles(
    m: FittedModel,
    h: int,
    levels: Sequence[float] = QUANTILE_LEVELS,
    unique_id: str = "",
    model: str = "",
    issuance_week_index: int = 0,
    nonnegative: bool = True,
) -> list[QuantileForecast]:
    if h < 1:
        raise BenchError("horizon must be >= 1")
    levels = check_levels(levels)
    z = Z_SCORES if levels == QUANTILE_LEVELS else np.array([_z(q) for q in levels])
    points = m.point_forecasts(h)
    sigmas = m.sigmas(h)
    out = []
    for k in range(h):
        q = points[k] + z * sigmas[k]
        if m.transform == "log1p":
            q = np.expm1(q)
        if nonnegative:
            q = np.maximum(q, 0.0)
        q = np.maximum.accumulate(q)
        out.append(QuantileForecast(unique_id, model, issuance_week_index, k + 1, tuple(float(v) for v in q)))
    return out


Fitter = Callable[[Sequence[float]], FittedModel]

MODELS: dict[str, Fitter] = {
    "flat": fit_flat,
    "ets": fit_ets,
    "ar": fit_ar,
}


def get_fitter(name: str, log1p: bool = False) -> Fitter:
    """Look up a baseline by name; ``log1p`` fits on log(1 + y) instead."""
    try:
        base = MODELS[name]
    except KeyError:
        raise BenchError(f"unknown model {name!r}; available: {', '.join(sorted(MODELS))}") from None
    if not log1p:
        return base

    def fitted_on_log(history):
        m = base(np.log1p(np.asarray(history, dtype=float)))
        return FittedModel(m.family, m.params, m.sigma2, "log1p", m.aicc)

    return fitted_on_log
