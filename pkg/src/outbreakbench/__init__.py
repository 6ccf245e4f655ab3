"""Outbreak segmentation, baseline forecasting and probabilistic scoring."""

from .core import MmwrWeek, Outbreak, SeriesKey, WeeklySeries, mmwr_week_of, validate_outbreak
from .forecasters import QUANTILE_LEVELS, QuantileForecast
from .harness import HarnessConfig
from .segmentation import SegmentationConfig

__version__ = "0.1.0"

__all__ = [
    "MmwrWeek",
    "Outbreak",
    "SeriesKey",
    "WeeklySeries",
    "mmwr_week_of",
    "validate_outbreak",
    "QUANTILE_LEVELS",
    "QuantileForecast",
    "HarnessConfig",
    "SegmentationConfig",
]
