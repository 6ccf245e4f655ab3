"""Shared domain types, MMWR calendar arithmetic and outbreak validation."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OUTCOMES",
    "COUNT_OUTCOMES",
    "BenchError",
    "CalendarRangeError",
    "InsufficientDataError",
    "DegenerateError",
    "FormatError",
    "MmwrWeek",
    "SeriesKey",
    "WeeklySeries",
    "Outbreak",
    "ValidationReport",
    "mmwr_week_of",
    "mmwr_year_start",
    "validate_outbreak",
]

# Closed outcome vocabulary. Percent outcomes are never summed.
OUTCOMES = ("CASES", "DEATHS", "HOSPITALIZATIONS", "PERCENT UNWEIGHTED")
COUNT_OUTCOMES = frozenset({"CASES", "DEATHS", "HOSPITALIZATIONS"})

MIN_DATE = dt.date(1900, 1, 1)
MAX_DATE = dt.date(2100, 12, 31)


class BenchError(ValueError):
    """Base class for all errors raised by this package."""


class CalendarRangeError(BenchError):
    pass


class InsufficientDataError(BenchError):
    pass


class DegenerateError(BenchError):
    """A quantity is undefined for the given input (zero mass, zero variance)."""


class FormatError(BenchError):
    pass


def mmwr_year_start(year: int) -> dt.date:
    """Sunday that opens MMWR week 1 of ``year``.

    Week 1 is the first Sunday-Saturday week holding at least four January
    days, which is the week containing January 4.
    """
    jan4 = dt.date(year, 1, 4)
    # isoweekday: Mon=1 .. Sun=7
    return jan4 - dt.timedelta(days=jan4.isoweekday() % 7)


@dataclass(frozen=True, order=True)
class MmwrWeek:
    year: int
    week: int
    end_date: dt.date = field(compare=False)

    def __post_init__(self):
        if self.end_date.isoweekday() != 6:
            raise BenchError(f"MMWR week must end on a Saturday, got {self.end_date}")
        if not 1 <= self.week <= 53:
            raise BenchError(f"MMWR week number out of range: {self.week}")

    @classmethod
    def from_date(cls, date: dt.date) -> MmwrWeek:
        return mmwr_week_of(date)

    def shift(self, weeks: int) -> MmwrWeek:
        return mmwr_week_of(self.end_date + dt.timedelta(weeks=weeks))

    def weeks_until(self, other: MmwrWeek) -> int:
        return (other.end_date - self.end_date).days // 7

    def __str__(self) -> str:
        return f"{self.year}-W{self.week:02d}"


def mmwr_week_of(date: dt.date) -> MmwrWeek:
    if isinstance(date, dt.datetime):
        date = date.date()
    if not MIN_DATE <= date <= MAX_DATE:
        raise CalendarRangeError(f"date {date} outside supported range [1900, 2100]")
    year = date.year
    if date < mmwr_year_start(year):
        year -= 1
    elif date >= mmwr_year_start(year + 1):
        year += 1
    start = mmwr_year_start(year)
    week = (date - start).days // 7 + 1
    end = start + dt.timedelta(days=7 * week - 1)
    return MmwrWeek(year, week, end)


@dataclass(frozen=True, order=True)
class SeriesKey:
    disease: str
    location: str
    outcome: str

    def __post_init__(self):
        for name in ("disease", "location", "outcome"):
            if not getattr(self, name).strip():
                raise BenchError(f"SeriesKey.{name} must be non-empty")
        if self.outcome not in OUTCOMES:
            raise BenchError(f"unknown outcome {self.outcome!r}; expected one of {OUTCOMES}")

    @property
    def is_count(self) -> bool:
        return self.outcome in COUNT_OUTCOMES

    def slug(self) -> str:
        raw = f"{self.disease}_{self.location}_{self.outcome}"
        return "".join(c if c.isalnum() or c in "-_" else "-" for c in raw)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class WeeklySeries:
    """Contiguous MMWR-week series; ``NaN`` marks a missing week."""

    key: SeriesKey
    start_week: MmwrWeek
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim != 1:
            raise BenchError("WeeklySeries values must be one-dimensional")
        present = arr[~np.isnan(arr)]
        if np.any(~np.isfinite(present)) or np.any(present < 0):
            raise BenchError("present values must be finite and non-negative")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def week_at(self, t: int) -> MmwrWeek:
        return self.start_week.shift(t)

    def equals(self, other: WeeklySeries) -> bool:
        return (
            self.key == other.key
            and self.start_week == other.start_week
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True, eq=False)
class Outbreak:
    unique_id: str
    key: SeriesKey
    start_week: MmwrWeek
    end_week: MmwrWeek
    duration: int
    values: np.ndarray
    core_start_offset: int
    core_end_offset: int

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))

    @property
    def core(self) -> np.ndarray:
        return self.values[self.core_start_offset : self.core_end_offset + 1]

    @property
    def core_length(self) -> int:
        return self.core_end_offset - self.core_start_offset + 1

    def equals(self, other: Outbreak) -> bool:
        return (
            self.unique_id == other.unique_id
            and self.key == other.key
            and self.start_week == other.start_week
            and self.end_week == other.end_week
            and self.duration == other.duration
            and self.core_start_offset == other.core_start_offset
            and self.core_end_offset == other.core_end_offset
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate_outbreak(
    o: Outbreak,
    min_core_weeks: int = 8,
    max_core_weeks: int = 52,
    pad_weeks: int = 4,
) -> ValidationReport:
    """Check every stored-field invariant of ``o`` and list the violations."""
    bad = []
    v = o.values
    if o.duration != len(v):
        bad.append(f"duration: {o.duration} != len(values) {len(v)}")
    if o.duration > max_core_weeks + 2 * pad_weeks:
        bad.append(f"duration: {o.duration} exceeds {max_core_weeks + 2 * pad_weeks}")
    if not np.all(np.isfinite(v)):
        bad.append("missing: values contain NaN or infinite entries")
    elif np.any(v < 0):
        bad.append("non-negativity: values contain negative entries")
    core_len = o.core_end_offset - o.core_start_offset + 1
    if not min_core_weeks <= core_len <= max_core_weeks:
        bad.append(
            f"duration bound: core length {core_len} outside [{min_core_weeks}, {max_core_weeks}]"
        )
    if not 0 <= o.core_start_offset <= pad_weeks:
        bad.append(f"padding: core_start_offset {o.core_start_offset} outside [0, {pad_weeks}]")
    trailing = o.duration - 1 - o.core_end_offset
    if not 0 <= trailing <= pad_weeks:
        bad.append(f"padding: trailing pad {trailing} outside [0, {pad_weeks}]")
    if o.start_week.weeks_until(o.end_week) != o.duration - 1:
        bad.append("calendar: end_week - start_week != duration - 1")
    return ValidationReport(not bad, tuple(bad))
