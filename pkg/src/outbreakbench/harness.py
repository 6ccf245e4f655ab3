"""Expanding-window backtesting over outbreaks."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import BenchError, Outbreak
from .forecasters import QUANTILE_LEVELS, QuantileForecast, forecast_quantiles, get_fitter

log = logging.getLogger(__name__)

WORKERS_ENV = "OUTBREAKBENCH_WORKERS"


@dataclass(frozen=True)
class HarnessConfig:
    min_history_weeks: int = 8
    max_horizon: int = 4
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    split_seed: int = 0
    minibatch_size: int = 100
    minibatch_repeats: int = 10

    def __post_init__(self):
        if abs(sum(self.split_fractions) - 1.0) > 1e-9 or min(self.split_fractions) < 0:
            raise BenchError("split fractions must be non-negative and sum to 1")
        if self.min_history_weeks < 2:
            raise BenchError("min_history_weeks must be >= 2")
        if self.max_horizon < 1:
            raise BenchError("max_horizon must be >= 1")
        if self.minibatch_size < 1 or self.minibatch_repeats < 1:
            raise BenchError("minibatch size and repeats must be >= 1")


def issuance_windows(duration: int | Outbreak, cfg: HarnessConfig = HarnessConfig()) -> list[tuple[int, list[int]]]:
    """(u, horizons) pairs: at least ``min_history_weeks`` observed, every target inside."""
    if isinstance(duration, Outbreak):
        duration = duration.duration
    h = cfg.max_horizon
    first = cfg.min_history_weeks - 1
    last = duration - 1 - h
    return [(u, list(range(1, h + 1))) for u in range(first, last + 1)]


def split_outbreaks(
    ids: Iterable[str], cfg: HarnessConfig = HarnessConfig()
) -> tuple[list[str], list[str], list[str]]:
    """Seeded shuffle then 60/20/20 cut; flooring remainders go to train."""
    ids = sorted(set(ids))
    if not ids:
        raise BenchError("cannot split an empty id list")
    order = np.random.default_rng(cfg.split_seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    n_val = math.floor(cfg.split_fractions[1] * n + 1e-9)
    n_test = math.floor(cfg.split_fractions[2] * n + 1e-9)
    n_train = n - n_val - n_test
    return (
        sorted(shuffled[:n_train]),
        sorted(shuffled[n_train : n_train + n_val]),
        sorted(shuffled[n_train + n_val :]),
    )


def sample_minibatches(test_ids: Sequence[str], cfg: HarnessConfig = HarnessConfig(), seed: int | None = None) -> list[list[str]]:
    ids = sorted(test_ids)
    if not ids:
        raise BenchError("no test ids to sample from")
    rng = np.random.default_rng(cfg.split_seed if seed is None else seed)
    size = min(cfg.minibatch_size, len(ids))
    if size == len(ids):
        return [ids]
    return [sorted(ids[i] for i in rng.choice(len(ids), size=size, replace=False)) for _ in range(cfg.minibatch_repeats)]


def minibatch_mean(values_by_id: dict[str, float], batches: Sequence[Sequence[str]]) -> float:
    """Mean over batches of the per-batch mean; batches weigh equally."""
    means = []
    for batch in batches:
        vals = [values_by_id[i] for i in batch if i in values_by_id and np.isfinite(values_by_id[i])]
        if vals:
            means.append(float(np.mean(vals)))
    return float(np.mean(means)) if means else math.nan


@dataclass
class BacktestResult:
    forecasts: list[QuantileForecast] = field(default_factory=list)
    # (unique_id, u, n_targets, reason) per failed window
    skipped: list[tuple[str, int, int, str]] = field(default_factory=list)

    @property
    def n_skipped_targets(self) -> int:
        return sum(s[2] for s in self.skipped)


def _backtest_one(args):
    outbreak, model, cfg, log1p, levels = args
    fitter = get_fitter(model, log1p=log1p)
    forecasts, skipped = [], []
    for u, horizons in issuance_windows(outbreak, cfg):
        prefix = outbreak.values[: u + 1]
        try:
            fitted = fitter(prefix)
            fc = forecast_quantiles(
                fitted, len(horizons), levels, outbreak.unique_id, model, u
            )
        except Exception as exc:  # one failed window must not end the run
            log.warning("fit failed for %s u=%d model=%s: %s", outbreak.unique_id, u, model, exc)
            skipped.append((outbreak.unique_id, u, len(horizons), str(exc)))
            continue
        forecasts.extend(fc)
    return forecasts, skipped


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_backtest(
    outbreaks: Sequence[Outbreak],
    model: str,
    cfg: HarnessConfig = HarnessConfig(),
    log1p: bool = False,
    levels: Sequence[float] = QUANTILE_LEVELS,
    workers: int | None = None,
) -> BacktestResult:
    """Refit ``model`` on every expanding prefix and emit quantile forecasts.

    Output order is (unique_id, u, horizon) whatever the worker count.
    """
    get_fitter(model)  # fail fast on unknown names
    jobs = [(o, model, cfg, log1p, tuple(levels)) for o in sorted(outbreaks, key=lambda o: o.unique_id)]
    n_workers = _worker_count(workers)
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_backtest_one, jobs))
    else:
        parts = [_backtest_one(j) for j in jobs]
    result = BacktestResult()
    for fc, sk in parts:
        result.forecasts.extend(fc)
        result.skipped.extend(sk)
    result.forecasts.sort(key=QuantileForecast.sort_key)
    return result
