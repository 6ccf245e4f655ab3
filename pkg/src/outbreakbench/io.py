"""Readers and writers for outbreak, forecast, measures and score files.

All files are UTF-8, comma-delimited, LF line endings. Floats are written in
their shortest round-trip form so that write -> read -> write is byte-exact.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .analytics import OutbreakMeasures
from .core import (
    BenchError,
    FormatError,
    MmwrWeek,
    Outbreak,
    SeriesKey,
    mmwr_week_of,
    validate_outbreak,
)
from .forecasters import QUANTILE_LEVELS, QuantileForecast
from .scoring import ScoreRecord

N_WEEK_COLUMNS = 60
OUTBREAK_HEADER = (
    "unique_id", "disease", "location", "event", "start_date", "end_date", "duration",
    *(str(i) for i in range(N_WEEK_COLUMNS)),
)  # fmt: skip
CORES_HEADER = ("unique_id", "core_start_offset", "core_end_offset")

HUBVERSE_HEADER = (
    "model_id", "unique_id", "origin_week_index", "reference_date", "target", "horizon",
    "location", "target_end_date", "output_type", "output_type_id", "value",
)  # fmt: skip
LEVEL_TEXT = {q: repr(q) for q in QUANTILE_LEVELS}


class LayoutOverflowError(BenchError):
    pass


def fmt(v) -> str:
    """Shortest round-trip text; NaN becomes an empty cell."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def hub_target(outcome: str) -> str:
    """Target string, e.g. ``wk inc cases``; the horizon lives in its own column."""
    return f"wk inc {outcome.lower()}"


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cores_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".cores.csv")


def _saturday(text: str) -> MmwrWeek:
    d = dt.date.fromisoformat(text)
    if d.isoweekday() != 6:
        raise ValueError(f"date {text} is not a Saturday")
    return mmwr_week_of(d)


# --- outbreak file -------------------------------------------------------------


def write_outbreak_file(outbreaks: Iterable[Outbreak], path: str | Path, with_cores: bool = True) -> None:
    """Write the outbreak table and, by default, the ``.cores.csv`` sidecar."""
    outbreaks = sorted(outbreaks, key=lambda o: o.unique_id)
    for o in outbreaks:
        if o.duration > N_WEEK_COLUMNS:
            raise LayoutOverflowError(f"{o.unique_id}: duration {o.duration} > {N_WEEK_COLUMNS}")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(OUTBREAK_HEADER)
        for o in outbreaks:
            cells = [fmt(float(v)) for v in o.values] + [""] * (N_WEEK_COLUMNS - o.duration)
            w.writerow(
                [
                    o.unique_id,
                    o.key.disease,
                    o.key.location,
                    o.key.outcome,
                    o.start_week.end_date.isoformat(),
                    o.end_week.end_date.isoformat(),
                    o.duration,
                    *cells,
                ]
            )
    if with_cores:
        with cores_path(path).open("w", newline="", encoding="utf-8") as fh:
            w = _writer(fh)
            w.writerow(CORES_HEADER)
            for o in outbreaks:
                w.writerow([o.unique_id, o.core_start_offset, o.core_end_offset])


@dataclass
class OutbreakFileResult:
    outbreaks: list[Outbreak] = field(default_factory=list)
    rejected: list[tuple[int, str]] = field(default_factory=list)  # (line number, reason)
    n_rows: int = 0


def _read_cores(path: Path) -> dict[str, tuple[int, int]]:
    side = cores_path(path)
    if not side.exists():
        return {}
    with side.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader, ())) != CORES_HEADER:
            raise FormatError(f"{side}: header must be {','.join(CORES_HEADER)}")
        return {row[0]: (int(row[1]), int(row[2])) for row in reader if row}


def _default_core(duration: int, pad: int = 4, min_core: int = 8) -> tuple[int, int]:
    if duration - 2 * pad >= min_core:
        return pad, duration - 1 - pad
    return 0, duration - 1


def read_outbreak_file(path: str | Path) -> OutbreakFileResult:
    """Parse and validate every row; bad rows are reported with line numbers.

    Core offsets come from the ``.cores.csv`` sidecar when present, otherwise a
    full four-week padding is assumed.
    """
    path = Path(path)
    cores = _read_cores(path)
    result = OutbreakFileResult()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != OUTBREAK_HEADER:
            raise FormatError(f"{path}: header does not match the outbreak file layout")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            result.n_rows += 1
            try:
                result.outbreaks.append(_parse_outbreak_row(row, cores))
            except (ValueError, BenchError) as exc:
                result.rejected.append((line, str(exc)))
    return result


def _parse_outbreak_row(row: list[str], cores: Mapping[str, tuple[int, int]]) -> Outbreak:
    if len(row) != len(OUTBREAK_HEADER):
        raise FormatError(f"expected {len(OUTBREAK_HEADER)} cells, got {len(row)}")
    uid, disease, location, event, start, end, duration = row[:7]
    cells = row[7:]
    duration = int(duration)
    filled = [c for c in cells if c.strip() != ""]
    if any(c.strip() == "" for c in cells[: len(filled)]):
        raise FormatError("week cells must be contiguous from column 0")
    if len(filled) != duration:
        raise FormatError(f"duration {duration} != populated week cells {len(filled)}")
    try:
        values = np.array([float(c) for c in filled])
    except ValueError as exc:
        raise FormatError(f"non-numeric week cell: {exc}") from None
    start_week = _saturday(start)
    end_week = _saturday(end)
    core = cores.get(uid, _default_core(duration))
    o = Outbreak(
        unique_id=uid,
        key=SeriesKey(disease, location, event),
        start_week=start_week,
        end_week=end_week,
        duration=duration,
        values=values,
        core_start_offset=core[0],
        core_end_offset=core[1],
    )
    report = validate_outbreak(o)
    if not report:
        raise BenchError("; ".join(report.violations))
    return o


# --- Hubverse quantile files ------------------------------------------------------


def write_hubverse(
    forecasts: Iterable[QuantileForecast], outbreaks: Mapping[str, Outbreak], path: str | Path
) -> None:
    """One row per quantile. ``reference_date`` is the Saturday of week u."""
    forecasts = sorted(forecasts, key=lambda f: (f.model, f.unique_id, f.issuance_week_index, f.horizon))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(HUBVERSE_HEADER)
        for f in forecasts:
            o = outbreaks[f.unique_id]
            ref = o.start_week.end_date + dt.timedelta(weeks=f.issuance_week_index)
            end = ref + dt.timedelta(weeks=f.horizon)
            for q, v in zip(QUANTILE_LEVELS, f.values):
                w.writerow(
                    [
                        f.model,
                        f.unique_id,
                        f.issuance_week_index,
                        ref.isoformat(),
                        hub_target(o.key.outcome),
                        f.horizon,
                        o.key.location,
                        end.isoformat(),
                        "quantile",
                        LEVEL_TEXT[q],
                        fmt(float(v)),
                    ]
                )


def _canonical_level(text: str) -> float:
    q = float(text)
    for level in QUANTILE_LEVELS:
        if abs(q - level) < 1e-9:
            return level
    raise FormatError(f"output_type_id {text!r} is not one of the 23 standard levels")


def read_hubverse(path: str | Path, outbreaks: Mapping[str, Outbreak] | None = None) -> list[QuantileForecast]:
    """Parse a quantile file; row order does not matter.

    Raises :class:`FormatError` naming the problem when any target lacks a
    level, repeats one, is non-monotone, or carries a non-Saturday date.
    """
    path = Path(path)
    groups: dict[tuple, dict[float, float]] = defaultdict(dict)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(HUBVERSE_HEADER) <= set(reader.fieldnames):
            raise FormatError(f"{path}: missing columns; need {','.join(HUBVERSE_HEADER)}")
        for line, row in enumerate(reader, start=2):
            try:
                if row["output_type"] != "quantile":
                    raise FormatError(f"unsupported output_type {row['output_type']!r}")
                ref = _saturday(row["reference_date"])
                _saturday(row["target_end_date"])
                key = (row["model_id"], row["unique_id"], int(row["origin_week_index"]), int(row["horizon"]))
                level = _canonical_level(row["output_type_id"])
                value = float(row["value"])
            except (ValueError, KeyError) as exc:
                raise FormatError(f"{path}:{line}: {exc}") from None
            if not math.isfinite(value):
                raise FormatError(f"{path}:{line}: non-finite value")
            if level in groups[key]:
                raise FormatError(f"{path}:{line}: duplicate level {LEVEL_TEXT[level]} for {key}")
            groups[key][level] = value
            if outbreaks is not None and key[1] in outbreaks:
                expected = outbreaks[key[1]].start_week.end_date + dt.timedelta(weeks=key[2])
                if ref.end_date != expected:
                    raise FormatError(
                        f"{path}:{line}: reference_date {ref.end_date} != {expected} for week index {key[2]}"
                    )

    forecasts = []
    for key in sorted(groups):
        levels = groups[key]
        missing = [LEVEL_TEXT[q] for q in QUANTILE_LEVELS if q not in levels]
        if missing:
            raise FormatError(f"{path}: target {key} is missing level(s) {', '.join(missing)}")
        values = tuple(levels[q] for q in QUANTILE_LEVELS)
        if any(b < a for a, b in zip(values, values[1:])):
            raise FormatError(f"{path}: target {key} has decreasing quantiles")
        model, uid, u, h = key
        if h < 1 or u < 0:
            raise FormatError(f"{path}: target {key} has invalid horizon or week index")
        forecasts.append(QuantileForecast(uid, model, u, h, values))
    forecasts.sort(key=QuantileForecast.sort_key)
    return forecasts


# --- generic tables ---------------------------------------------------------------


def _cell_float(text: str) -> float:
    return float(text) if text != "" else math.nan


def write_rows(rows: Sequence[Mapping], path: str | Path, columns: Sequence[str] | None = None) -> None:
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row.get(c)) for c in columns])


MEASURE_COLUMNS = tuple(OutbreakMeasures.__dataclass_fields__)
SCORE_COLUMNS = tuple(ScoreRecord.__dataclass_fields__)


def write_measures(measures: Sequence[OutbreakMeasures], path: str | Path) -> None:
    write_rows([asdict(m) for m in measures], path, MEASURE_COLUMNS)


def read_measures(path: str | Path) -> list[OutbreakMeasures]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            OutbreakMeasures(r["unique_id"], *(_cell_float(r[c]) for c in MEASURE_COLUMNS[1:]))
            for r in reader
        ]


def write_scores(records: Sequence[ScoreRecord], path: str | Path) -> None:
    write_rows([asdict(r) for r in records], path, SCORE_COLUMNS)


def read_scores(path: str | Path) -> list[ScoreRecord]:
    ints = {"issuance_week_index", "horizon"}
    strs = {"unique_id", "model", "phase", "disease", "location", "outcome"}
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            kw = {}
            for c in SCORE_COLUMNS:
                if c in ints:
                    kw[c] = int(r[c])
                elif c in strs:
                    kw[c] = r[c]
                else:
                    kw[c] = _cell_float(r[c])
            out.append(ScoreRecord(**kw))
    return out
