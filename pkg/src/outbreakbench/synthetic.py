"""Deterministic synthetic surveillance series for tests and demos."""

from __future__ import annotations

import datetime as dt
from importlib import resources
from pathlib import Path

import numpy as np

from .core import SeriesKey, WeeklySeries, mmwr_week_of

BUNDLED_CORPUS = "synthetic_weekly.csv"


def gaussian_bumps(length: int, centers, width: float, height: float = 100.0, base: float = 0.0) -> np.ndarray:
    t = np.arange(length, dtype=float)
    x = np.full(length, base)
    for c in centers:
        x += height * np.exp(-0.5 * ((t - c) / width) ** 2)
    return x


def two_bump_values(length: int = 40, width: float = 3.0) -> np.ndarray:
    """Two equal bumps at weeks 10 and 30; the analytic trough is week 20."""
    return gaussian_bumps(length, (10, 30), width)


def wave_train(rng: np.random.Generator, n_waves: int, base: float, scale: float) -> np.ndarray:
    """Noisy sequence of epidemic-like waves with a steeper rise than decline."""
    chunks = []
    for _ in range(n_waves):
        length = int(rng.integers(18, 34))
        peak = int(rng.integers(length // 4, length // 2))
        t = np.arange(length, dtype=float)
        rise = np.exp(-0.5 * ((t - peak) / max(peak / 2.5, 1.5)) ** 2)
        fall = np.exp(-0.5 * ((t - peak) / ((length - peak) / 2.5)) ** 2)
        shape = np.where(t <= peak, rise, fall)
        chunks.append(base + scale * rng.uniform(0.5, 1.5) * shape)
    mean = np.concatenate(chunks)
    return rng.poisson(mean).astype(float)


SYNTHETIC_KEYS = (
    (SeriesKey("MEASLES", "ALPHA", "CASES"), 6, 5.0, 400.0),
    (SeriesKey("POLIOMYELITIS", "BETA", "CASES"), 5, 2.0, 150.0),
    (SeriesKey("COVID-19", "GAMMA", "HOSPITALIZATIONS"), 5, 20.0, 900.0),
    (SeriesKey("INFLUENZA", "DELTA", "HOSPITALIZATIONS"), 5, 10.0, 300.0),
)


def synthetic_corpus(seed: int = 20240601, start: dt.date = dt.date(2010, 1, 2)) -> list[WeeklySeries]:
    rng = np.random.default_rng(seed)
    week = mmwr_week_of(start)
    return [WeeklySeries(key, week, wave_train(rng, n, base, scale)) for key, n, base, scale in SYNTHETIC_KEYS]


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("outbreakbench") / "data" / BUNDLED_CORPUS))
