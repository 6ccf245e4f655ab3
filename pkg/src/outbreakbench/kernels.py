"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

Both implementations of a kernel perform the same floating point operations in
the same order, so they agree bit for bit. The public name dispatches on the
backend chosen in :mod:`outbreakbench._accel`.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit

__all__ = [
    "gaussian_weights",
    "smooth_reflect",
    "ordinal_codes",
    "ets_sse_grid",
    "wis_batch",
]


def gaussian_weights(sigma: float, truncate: float = 4.0) -> np.ndarray:
    radius = int(truncate * sigma + 0.5)
    j = np.arange(-radius, radius + 1, dtype=float)
    w = np.exp(-0.5 * (j / sigma) ** 2)
    return w / w.sum()


# --- Gaussian smoothing with half-sample reflection ------------------------


def _reflect_index_numpy(idx: np.ndarray, n: int) -> np.ndarray:
    m = np.mod(idx, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m)


def smooth_reflect_numpy(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    radius = (weights.shape[0] - 1) // 2
    base = np.arange(n)
    acc = np.zeros(n)
    wsum = 0.0
    for k in range(weights.shape[0]):
        src = _reflect_index_numpy(base + (k - radius), n)
        acc += weights[k] * (x[src] - x)
        wsum += weights[k]
    return x + acc / wsum


@njit(cache=True)
def smooth_reflect_numba(x, weights):
    n = x.shape[0]
    radius = (weights.shape[0] - 1) // 2
    wsum = 0.0
    for k in range(weights.shape[0]):
        wsum += weights[k]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(weights.shape[0]):
            m = (i + k - radius) % (2 * n)
            if m >= n:
                m = 2 * n - 1 - m
            acc += weights[k] * (x[m] - x[i])
        out[i] = x[i] + acc / wsum
    return out


def smooth_reflect(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted moving average of ``x`` with mirrored boundaries.

    Computed as ``x[i] + sum(w * (x[j] - x[i])) / sum(w)`` so a constant input
    comes back bit-identical.
    """
    x = np.ascontiguousarray(x, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    if _accel.numba_enabled():
        return smooth_reflect_numba(x, weights)
    return smooth_reflect_numpy(x, weights)


# --- Ordinal pattern coding -------------------------------------------------


def ordinal_codes_numpy(x: np.ndarray, order: int, delay: int) -> np.ndarray:
    span = (order - 1) * delay + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, span)[:, ::delay]
    perms = np.argsort(windows, axis=1, kind="stable")
    powers = order ** np.arange(order, dtype=np.int64)
    return perms.astype(np.int64) @ powers


@njit(cache=True)
def ordinal_codes_numba(x, order, delay):
    n_win = x.shape[0] - (order - 1) * delay
    codes = np.empty(n_win, dtype=np.int64)
    perm = np.empty(order, dtype=np.int64)
    for w in range(n_win):
        # stable insertion sort of window positions by value
        for a in range(order):
            perm[a] = a
        for a in range(1, order):
            cur = perm[a]
            v = x[w + cur * delay]
            b = a - 1
            while b >= 0 and x[w + perm[b] * delay] > v:
                perm[b + 1] = perm[b]
                b -= 1
            perm[b + 1] = cur
        code = 0
        p = 1
        for a in range(order):
            code += perm[a] * p
            p *= order
        codes[w] = code
    return codes


def ordinal_codes(x: np.ndarray, order: int, delay: int = 1) -> np.ndarray:
    """Integer id of the stable-argsort permutation of every embedding vector."""
    x = np.ascontiguousarray(x, dtype=float)
    if _accel.numba_enabled():
        return ordinal_codes_numba(x, order, delay)
    return ordinal_codes_numpy(x, order, delay)


# --- Additive damped-trend exponential smoothing ------------------------------


def ets_sse_grid_numpy(y, alpha, beta, phi, level0, trend0, start):
    level = np.full(alpha.shape[0], level0)
    trend = np.full(alpha.shape[0], trend0)
    sse = np.zeros(alpha.shape[0])
    for t in range(1, y.shape[0]):
        e = y[t] - (level + phi * trend)
        if t >= start:
            sse += e * e
        new_level = level + phi * trend + alpha * e
        trend = phi * trend + beta * e
        level = new_level
    return sse, level, trend


@njit(cache=True)
def ets_sse_grid_numba(y, alpha, beta, phi, level0, trend0, start):
    g = alpha.shape[0]
    sse = np.zeros(g)
    level_out = np.empty(g)
    trend_out = np.empty(g)
    for k in range(g):
        level = level0
        trend = trend0
        acc = 0.0
        for t in range(1, y.shape[0]):
            e = y[t] - (level + phi[k] * trend)
            if t >= start:
                acc += e * e
            new_level = level + phi[k] * trend + alpha[k] * e
            trend = phi[k] * trend + beta[k] * e
            level = new_level
        sse[k] = acc
        level_out[k] = level
        trend_out[k] = trend
    return sse, level_out, trend_out


def ets_sse_grid(y, alpha, beta, phi, level0: float, trend0: float, start: int = 2):
    """One-step squared error of the damped-trend recursion for many parameter rows.

    ``y[0]`` is consumed by the initial state. Errors at ``t >= start`` enter the
    sum. Returns ``(sse, final_level, final_trend)`` arrays aligned to the rows.
    SES is ``beta=0, trend0=0``; Holt is ``phi=1``.
    """
    y = np.ascontiguousarray(y, dtype=float)
    alpha = np.ascontiguousarray(alpha, dtype=float)
    beta = np.ascontiguousarray(beta, dtype=float)
    phi = np.ascontiguousarray(phi, dtype=float)
    if _accel.numba_enabled():
        return ets_sse_grid_numba(y, alpha, beta, phi, float(level0), float(trend0), int(start))
    return ets_sse_grid_numpy(y, alpha, beta, phi, float(level0), float(trend0), int(start))


# --- Weighted interval score ---------------------------------------------------


def wis_batch_numpy(q, y, lower_idx, upper_idx, median_idx, alphas):
    total = 0.5 * np.abs(y - q[:, median_idx])
    for k in range(alphas.shape[0]):
        a = alphas[k]
        lo = q[:, lower_idx[k]]
        hi = q[:, upper_idx[k]]
        score = (hi - lo) + (2.0 / a) * np.maximum(lo - y, 0.0) + (2.0 / a) * np.maximum(y - hi, 0.0)
        total = total + (a / 2.0) * score
    return total / (alphas.shape[0] + 0.5)


@njit(cache=True)
def wis_batch_numba(q, y, lower_idx, upper_idx, median_idx, alphas):
    n = q.shape[0]
    out = np.empty(n)
    for i in range(n):
        total = 0.5 * abs(y[i] - q[i, median_idx])
        for k in range(alphas.shape[0]):
            a = alphas[k]
            lo = q[i, lower_idx[k]]
            hi = q[i, upper_idx[k]]
            score = (hi - lo) + (2.0 / a) * max(lo - y[i], 0.0) + (2.0 / a) * max(y[i] - hi, 0.0)
            total = total + (a / 2.0) * score
        out[i] = total / (alphas.shape[0] + 0.5)
    return out


def wis_batch(q, y, lower_idx, upper_idx, median_idx: int, alphas) -> np.ndarray:
    """Weighted interval score for each row of a quantile matrix."""
    q = np.ascontiguousarray(q, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    lower_idx = np.ascontiguousarray(lower_idx, dtype=np.int64)
    upper_idx = np.ascontiguousarray(upper_idx, dtype=np.int64)
    alphas = np.ascontiguousarray(alphas, dtype=float)
    if _accel.numba_enabled():
        return wis_batch_numba(q, y, lower_idx, upper_idx, int(median_idx), alphas)
    return wis_batch_numpy(q, y, lower_idx, upper_idx, int(median_idx), alphas)
