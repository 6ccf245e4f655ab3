"""Derivative-based segmentation of weekly series into outbreaks.

A series is smoothed with a Gaussian kernel; cut points sit where the smoothed
first derivative turns from negative to non-negative (wave troughs) and pass an
optional curvature filter. Consecutive cut points, together with the series
endpoints, delimit candidate outbreaks which are then filtered on core length
and padded with neighbouring weeks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import BenchError, InsufficientDataError, Outbreak, SeriesKey, WeeklySeries


@dataclass(frozen=True)
class SegmentationConfig:
    kernel_bandwidth_weeks: float = 2.0
    # cut accepted iff second derivative < threshold; +inf keeps every crossing
    second_derivative_threshold: float = math.inf
    min_core_weeks: int = 8
    max_core_weeks: int = 52
    pad_weeks: int = 4

    def __post_init__(self):
        if not self.kernel_bandwidth_weeks > 0:
            raise BenchError("kernel_bandwidth_weeks must be positive")
        if not 0 < self.min_core_weeks <= self.max_core_weeks:
            raise BenchError("need 0 < min_core_weeks <= max_core_weeks")
        if self.pad_weeks < 0:
            raise BenchError("pad_weeks must be >= 0")

    @property
    def max_duration(self) -> int:
        return self.max_core_weeks + 2 * self.pad_weeks


@dataclass(frozen=True, eq=False)
class CutPointReport:
    key: SeriesKey | None
    smoothed: np.ndarray
    first_derivative: np.ndarray
    second_derivative: np.ndarray
    raw_crossings: tuple[int, ...]
    accepted: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "key": None if self.key is None else [self.key.disease, self.key.location, self.key.outcome],
            "smoothed": [float(v) for v in self.smoothed],
            "first_derivative": [float(v) for v in self.first_derivative],
            "second_derivative": [float(v) for v in self.second_derivative],
            "raw_crossings": list(self.raw_crossings),
            "accepted": list(self.accepted),
        }


def gaussian_smooth(x: Sequence[float], sigma: float) -> np.ndarray:
    """Gaussian-weighted average truncated at 4 sigma, mirrored at the edges."""
    x = np.asarray(x, dtype=float)
    if x.size < 1:
        raise InsufficientDataError("cannot smooth an empty series")
    if not sigma > 0:
        raise BenchError("sigma must be positive")
    return kernels.smooth_reflect(x, kernels.gaussian_weights(sigma))


def derivatives(x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise InsufficientDataError("derivatives need at least 3 points")
    first = np.gradient(x)
    return first, np.gradient(first)


def detect_cutpoints(
    x: Sequence[float], cfg: SegmentationConfig = SegmentationConfig(), key: SeriesKey | None = None
) -> CutPointReport:
    x = np.asarray(x, dtype=float)
    if x.size < max(3, cfg.min_core_weeks):
        raise InsufficientDataError(
            f"series of length {x.size} shorter than {max(3, cfg.min_core_weeks)}"
        )
    smoothed = gaussian_smooth(x, cfg.kernel_bandwidth_weeks)
    d1, d2 = derivatives(smoothed)
    crossings = np.flatnonzero((d1[:-1] < 0) & (d1[1:] >= 0)) + 1
    accepted = [int(t) for t in crossings if d2[t] < cfg.second_derivative_threshold]
    return CutPointReport(
        key, smoothed, d1, d2, tuple(int(t) for t in crossings), tuple(accepted)
    )


def segment_bounds(n: int, cuts: Sequence[int]) -> list[tuple[int, int]]:
    """Inclusive (start, end) cores delimited by the cuts and the series ends."""
    edges = [0, *cuts, n]
    return [(a, b - 1) for a, b in zip(edges, edges[1:]) if b > a]


def segment(
    s: WeeklySeries,
    cfg: SegmentationConfig = SegmentationConfig(),
    report: CutPointReport | None = None,
) -> list[Outbreak]:
    """Split ``s`` into padded outbreaks, in temporal order.

    Cores with no variation at all (flat stretches) are not outbreaks and are
    dropped along with cores outside the length bounds.
    """
    values = np.asarray(s.values, dtype=float)
    if np.isnan(values).any():
        raise BenchError(f"{s.key}: impute missing values before segmenting")
    n = values.size
    if n < max(3, cfg.min_core_weeks):
        return []
    if report is None:
        report = detect_cutpoints(values, cfg, s.key)

    outbreaks = []
    for start, end in segment_bounds(n, report.accepted):
        core_len = end - start + 1
        if not cfg.min_core_weeks <= core_len <= cfg.max_core_weeks:
            continue
        core = values[start : end + 1]
        if core.max() == core.min():
            continue
        lo = max(0, start - cfg.pad_weeks)
        hi = min(n - 1, end + cfg.pad_weeks)
        outbreaks.append(
            Outbreak(
                unique_id=f"{s.key.disease}_{s.key.location}_{s.key.outcome}_{len(outbreaks)}",
                key=s.key,
                start_week=s.week_at(lo),
                end_week=s.week_at(hi),
                duration=hi - lo + 1,
                values=values[lo : hi + 1],
                core_start_offset=start - lo,
                core_end_offset=end - lo,
            )
        )
    return outbreaks


@dataclass
class SegmentationResult:
    outbreaks: list[Outbreak] = field(default_factory=list)
    reports: list[CutPointReport] = field(default_factory=list)
    skipped: list[tuple[SeriesKey, str]] = field(default_factory=list)


def segment_many(series: Sequence[WeeklySeries], cfg: SegmentationConfig) -> SegmentationResult:
    result = SegmentationResult()
    for s in sorted(series, key=lambda s: s.key):
        try:
            report = detect_cutpoints(s.values, cfg, s.key)
        except InsufficientDataError as exc:
            result.skipped.append((s.key, str(exc)))
            continue
        result.reports.append(report)
        result.outbreaks.extend(segment(s, cfg, report))
    return result
