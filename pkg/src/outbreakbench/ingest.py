"""Raw surveillance exports to clean weekly series."""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BenchError,
    FormatError,
    InsufficientDataError,
    SeriesKey,
    WeeklySeries,
    mmwr_week_of,
)

DEFAULT_MAX_MISSING_FRACTION = 0.4

RAW_COLUMNS = ("disease", "location", "event", "date", "value")


@dataclass(frozen=True)
class RawSeries:
    key: SeriesKey
    resolution: str  # "daily" | "weekly"
    observations: tuple[tuple[dt.date, float | None], ...]

    def __post_init__(self):
        if self.resolution not in ("daily", "weekly"):
            raise BenchError(f"unknown resolution {self.resolution!r}")
        dates = [d for d, _ in self.observations]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise BenchError(f"{self.key}: observation dates must be strictly increasing")
        for d, v in self.observations:
            if v is not None and (not math.isfinite(v) or v < 0):
                raise BenchError(f"{self.key}: invalid value {v!r} on {d}")


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    missing_fraction: float
    reason: str


def aggregate_daily_to_weekly(r: RawSeries) -> WeeklySeries:
    """Sum daily counts into Sunday-Saturday weeks.

    A week with any missing or absent day is missing. Partial weeks at either
    end of the record are dropped.
    """
    if r.resolution != "daily":
        raise BenchError("aggregate_daily_to_weekly needs a daily series")
    if not r.key.is_count:
        raise BenchError(f"refusing to sum non-count outcome {r.key.outcome!r}")
    if not r.observations:
        raise InsufficientDataError(f"{r.key}: empty series")

    by_date = dict(r.observations)
    first, last = r.observations[0][0], r.observations[-1][0]
    # first Sunday on/after first day, last Saturday on/before last day
    start = first + dt.timedelta(days=(7 - first.isoweekday() % 7) % 7)
    stop = last - dt.timedelta(days=(last.isoweekday() + 1) % 7)
    n_weeks = ((stop - start).days + 1) // 7
    if n_weeks <= 0:
        raise InsufficientDataError(f"{r.key}: no complete Sunday-Saturday week")

    values = np.empty(n_weeks)
    for w in range(n_weeks):
        days = [by_date.get(start + dt.timedelta(days=7 * w + i)) for i in range(7)]
        values[w] = np.nan if any(v is None for v in days) else float(sum(days))
    return WeeklySeries(r.key, mmwr_week_of(start), values)


def weekly_from_observations(r: RawSeries) -> WeeklySeries:
    """Place weekly observations on a contiguous MMWR grid; gaps become missing."""
    if r.resolution != "weekly":
        raise BenchError("weekly_from_observations needs a weekly series")
    if not r.observations:
        raise InsufficientDataError(f"{r.key}: empty series")
    weeks = [mmwr_week_of(d) for d, _ in r.observations]
    if len(set(weeks)) != len(weeks):
        raise BenchError(f"{r.key}: two observations fall in the same MMWR week")
    first = weeks[0]
    values = np.full(first.weeks_until(weeks[-1]) + 1, np.nan)
    for w, (_, v) in zip(weeks, r.observations):
        if v is not None:
            values[first.weeks_until(w)] = v
    return WeeklySeries(r.key, first, values)


def to_weekly(r: RawSeries) -> WeeklySeries:
    if r.resolution == "daily":
        return aggregate_daily_to_weekly(r)
    return weekly_from_observations(r)


def impute_linear(s: WeeklySeries) -> WeeklySeries:
    """Trim missing ends and linearly interpolate interior gaps."""
    missing = s.missing
    present = np.flatnonzero(~missing)
    if present.size < 2:
        raise InsufficientDataError(f"{s.key}: need at least 2 present values to impute")
    lo, hi = present[0], present[-1]
    values = np.array(s.values[lo : hi + 1])
    gaps = np.isnan(values)
    if gaps.any():
        t = np.arange(values.size)
        values[gaps] = np.interp(t[gaps], t[~gaps], values[~gaps])
    return WeeklySeries(s.key, s.start_week.shift(int(lo)), values)


def missing_fraction(s: WeeklySeries) -> float:
    return float(s.missing.mean()) if len(s) else 1.0


def filter_sparse(
    s: WeeklySeries, max_missing_fraction: float = DEFAULT_MAX_MISSING_FRACTION
) -> FilterDecision:
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise BenchError("max_missing_fraction must lie in [0, 1]")
    frac = missing_fraction(s)
    if frac > max_missing_fraction:
        return FilterDecision(False, frac, f"missing fraction {frac:.3f} > {max_missing_fraction}")
    return FilterDecision(True, frac, "ok")


# --- flat-file readers/writers -------------------------------------------------


def _parse_value(cell: str) -> float | None:
    cell = cell.strip()
    if cell == "":
        return None
    return float(cell)


def read_raw_file(path: str | Path, resolution: str) -> list[RawSeries]:
    """Read one delimiter-separated export into one RawSeries per key."""
    path = Path(path)
    grouped: dict[SeriesKey, list[tuple[dt.date, float | None]]] = defaultdict(list)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(RAW_COLUMNS):
            raise FormatError(f"{path}: header must be {','.join(RAW_COLUMNS)}")
        for line, row in enumerate(reader, start=2):
            try:
                key = SeriesKey(row["disease"].strip(), row["location"].strip(), row["event"].strip())
                date = dt.date.fromisoformat(row["date"].strip())
                value = _parse_value(row["value"])
            except (ValueError, TypeError, AttributeError) as exc:
                raise FormatError(f"{path}:{line}: {exc}") from exc
            grouped[key].append((date, value))
    return [
        RawSeries(key, resolution, tuple(sorted(obs, key=lambda o: o[0])))
        for key, obs in sorted(grouped.items())
    ]


def read_manifest(path: str | Path) -> list[tuple[Path, str]]:
    """Manifest CSV with columns ``path,resolution``; paths relative to the manifest."""
    path = Path(path)
    entries = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"path", "resolution"}:
            raise FormatError(f"{path}: manifest needs columns path,resolution")
        for row in reader:
            entries.append((path.parent / row["path"].strip(), row["resolution"].strip()))
    return entries


def write_series_file(s: WeeklySeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_COLUMNS)
        for t, v in enumerate(s.values):
            writer.writerow(
                [
                    s.key.disease,
                    s.key.location,
                    s.key.outcome,
                    s.week_at(t).end_date.isoformat(),
                    "" if np.isnan(v) else repr(float(v)),
                ]
            )


def read_series_file(path: str | Path) -> WeeklySeries:
    raws = read_raw_file(path, "weekly")
    if len(raws) != 1:
        raise FormatError(f"{path}: expected exactly one series, found {len(raws)}")
    return weekly_from_observations(raws[0])


def prepare_series(
    raws: Iterable[RawSeries], max_missing_fraction: float = DEFAULT_MAX_MISSING_FRACTION
) -> tuple[list[WeeklySeries], list[tuple[SeriesKey, str]]]:
    """Aggregate, filter on raw missingness, then impute. Returns (kept, dropped)."""
    kept: list[WeeklySeries] = []
    dropped: list[tuple[SeriesKey, str]] = []
    for raw in raws:
        try:
            weekly = to_weekly(raw)
            decision = filter_sparse(weekly, max_missing_fraction)
            if not decision.keep:
                dropped.append((raw.key, decision.reason))
                continue
            kept.append(impute_linear(weekly))
        except BenchError as exc:
            dropped.append((raw.key, str(exc)))
    return kept, dropped


def series_from_values(
    key: SeriesKey, start: dt.date, values: Sequence[float | None]
) -> WeeklySeries:
    """Convenience constructor; ``None`` marks a missing week."""
    arr = np.array([np.nan if v is None else v for v in values], dtype=float)
    return WeeklySeries(key, mmwr_week_of(start), arr)
