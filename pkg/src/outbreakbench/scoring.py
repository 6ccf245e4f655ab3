"""Forecast scoring: interval scores, WIS/NWIS, point errors and aggregation."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .core import BenchError, Outbreak
from .forecasters import MEDIAN_INDEX, QUANTILE_LEVELS, QuantileForecast

PRE_PEAK = "pre_peak"
POST_PEAK = "post_peak"

# central intervals pair level i with level 22-i
_N = len(QUANTILE_LEVELS)
LOWER_IDX = np.arange(MEDIAN_INDEX)
UPPER_IDX = _N - 1 - LOWER_IDX
INTERVAL_ALPHAS = np.array([round(2 * QUANTILE_LEVELS[i], 10) for i in LOWER_IDX])

GROUP_KEYS = ("model", "horizon", "disease", "location", "outcome", "phase", "unique_id")

NMSE_MODES = ("mean_product", "variance")


class MalformedForecastError(BenchError):
    pass


@dataclass(frozen=True)
class ScoreRecord:
    unique_id: str
    model: str
    issuance_week_index: int
    horizon: int
    observed: float
    point: float
    wis: float
    nwis: float  # NaN when observed <= 0
    ape: float  # NaN when observed <= 0
    squared_error: float
    phase: str
    disease: str = ""
    location: str = ""
    outcome: str = ""


def interval_score(lower: float, upper: float, alpha: float, y: float) -> float:
    if lower > upper:
        raise BenchError(f"malformed interval: lower {lower} > upper {upper}")
    if not 0 < alpha < 1:
        raise BenchError("alpha must lie in (0, 1)")
    score = upper - lower
    if y < lower:
        score += (2.0 / alpha) * (lower - y)
    if y > upper:
        score += (2.0 / alpha) * (y - upper)
    return score


def _quantile_matrix(forecasts: Sequence[QuantileForecast]) -> np.ndarray:
    q = np.array([f.values for f in forecasts], dtype=float).reshape(len(forecasts), -1)
    if q.shape[1] != _N:
        raise MalformedForecastError(f"expected {_N} quantiles, got {q.shape[1]}")
    if np.any(np.diff(q, axis=1) < 0):
        raise MalformedForecastError("quantiles must be non-decreasing in level")
    return q


def wis(f: QuantileForecast, y: float) -> float:
    """Weighted interval score: median term plus 11 central intervals, weight 1/(K+0.5)."""
    return float(wis_many([f], [y])[0])


def wis_many(forecasts: Sequence[QuantileForecast], ys: Sequence[float]) -> np.ndarray:
    q = _quantile_matrix(forecasts)
    return kernels.wis_batch(q, np.asarray(ys, dtype=float), LOWER_IDX, UPPER_IDX, MEDIAN_INDEX, INTERVAL_ALPHAS)


def nwis(wis_value: float, y: float) -> float:
    if wis_value < 0:
        raise BenchError("WIS cannot be negative")
    return wis_value / y if y > 0 else math.nan


def point_metrics(f: QuantileForecast, y: float) -> tuple[float, float]:
    """(absolute percentage error, squared error) of the median."""
    point = f.median
    ape = 100.0 * abs(y - point) / y if y > 0 else math.nan
    return ape, (y - point) ** 2


def peak_index(o: Outbreak) -> int:
    """First argmax of the core, in padded-outbreak coordinates."""
    return o.core_start_offset + int(np.argmax(o.core))


def peak_phase(o: Outbreak, u: int) -> str:
    return PRE_PEAK if u < peak_index(o) else POST_PEAK


@dataclass
class ScoringResult:
    records: list[ScoreRecord] = field(default_factory=list)
    unmatched: list[tuple[str, str, int, int, str]] = field(default_factory=list)


def score_forecasts(
    forecasts: Iterable[QuantileForecast], outbreaks: Mapping[str, Outbreak] | Sequence[Outbreak]
) -> ScoringResult:
    """Score every forecast against the observed outbreak value at its target week.

    Forecasts whose outbreak or target week is unknown are listed as unmatched.
    """
    if not isinstance(outbreaks, Mapping):
        outbreaks = {o.unique_id: o for o in outbreaks}
    result = ScoringResult()
    matched: list[QuantileForecast] = []
    ys: list[float] = []
    for f in forecasts:
        o = outbreaks.get(f.unique_id)
        if o is None:
            result.unmatched.append((f.model, f.unique_id, f.issuance_week_index, f.horizon, "unknown unique_id"))
            continue
        t = f.target_index
        if not 0 <= f.issuance_week_index < t < o.duration:
            result.unmatched.append((f.model, f.unique_id, f.issuance_week_index, f.horizon, "target outside outbreak"))
            continue
        matched.append(f)
        ys.append(float(o.values[t]))
    if not matched:
        return result
    scores = wis_many(matched, ys)
    for f, y, w in zip(matched, ys, scores):
        o = outbreaks[f.unique_id]
        ape, se = point_metrics(f, y)
        result.records.append(
            ScoreRecord(
                unique_id=f.unique_id,
                model=f.model,
                issuance_week_index=f.issuance_week_index,
                horizon=f.horizon,
                observed=y,
                point=f.median,
                wis=float(w),
                nwis=nwis(float(w), y),
                ape=ape,
                squared_error=se,
                phase=peak_phase(o, f.issuance_week_index),
                disease=o.key.disease,
                location=o.key.location,
                outcome=o.key.outcome,
            )
        )
    result.records.sort(key=lambda r: (r.model, r.unique_id, r.issuance_week_index, r.horizon))
    return result


def _defined_mean(values: Sequence[float]) -> tuple[float, int]:
    arr = np.asarray(values, dtype=float)
    ok = arr[np.isfinite(arr)]
    return (float(ok.mean()) if ok.size else math.nan), int(arr.size - ok.size)


def _nmse(records: Sequence[ScoreRecord], mode: str) -> float:
    se = np.array([r.squared_error for r in records])
    y = np.array([r.observed for r in records])
    if mode == "mean_product":
        denom = y.mean() * np.array([r.point for r in records]).mean()
    elif mode == "variance":
        denom = y.var()
    else:
        raise BenchError(f"unknown NMSE mode {mode!r}; choose from {NMSE_MODES}")
    return float(se.mean() / denom) if denom > 0 else math.nan


def summarize(records: Sequence[ScoreRecord], nmse_mode: str = "mean_product") -> dict:
    nwis_mean, nwis_excluded = _defined_mean([r.nwis for r in records])
    mape, ape_excluded = _defined_mean([r.ape for r in records])
    return {
        "n_targets": len(records),
        "wis": float(np.mean([r.wis for r in records])),
        "nwis": nwis_mean,
        "nwis_excluded": nwis_excluded,
        "mape": mape,
        "mape_excluded": ape_excluded,
        "nmse": _nmse(records, nmse_mode),
    }


def aggregate(
    records: Sequence[ScoreRecord], group_by: Sequence[str], nmse_mode: str = "mean_product"
) -> list[dict]:
    """One row per group with mean WIS/NWIS/MAPE and group-level NMSE."""
    if not records:
        raise BenchError("nothing to aggregate")
    unknown = set(group_by) - set(GROUP_KEYS)
    if unknown:
        raise BenchError(f"unknown group keys {sorted(unknown)}; choose from {GROUP_KEYS}")
    groups: dict[tuple, list[ScoreRecord]] = defaultdict(list)
    for r in records:
        groups[tuple(getattr(r, k) for k in group_by)].append(r)
    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        row = dict(zip(group_by, key))
        row.update(summarize(groups[key], nmse_mode))
        rows.append(row)
    return rows


def horizon_table(records: Sequence[ScoreRecord], nmse_mode: str = "mean_product") -> list[dict]:
    """Model x horizon grid plus two combined rows per model.

    ``all`` pools every target; ``mean_1_h`` averages the per-horizon metrics.
    """
    rows = aggregate(records, ("model", "horizon"), nmse_mode)
    out = []
    metrics = ("wis", "nwis", "mape", "nmse")
    for model in sorted({r.model for r in records}):
        mine = [r for r in rows if r["model"] == model]
        out.extend(mine)
        pooled = {"model": model, "horizon": "all"}
        pooled.update(summarize([r for r in records if r.model == model], nmse_mode))
        out.append(pooled)
        avg = {"model": model, "horizon": f"mean_1_{max(r['horizon'] for r in mine)}"}
        for m in metrics:
            vals = [r[m] for r in mine if np.isfinite(r[m])]
            avg[m] = float(np.mean(vals)) if vals else math.nan
        avg["n_targets"] = sum(r["n_targets"] for r in mine)
        avg["nwis_excluded"] = sum(r["nwis_excluded"] for r in mine)
        avg["mape_excluded"] = sum(r["mape_excluded"] for r in mine)
        out.append(avg)
    return out


def record_dict(r: ScoreRecord) -> dict:
    return asdict(r)
