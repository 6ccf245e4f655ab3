"""Per-outbreak diversity measures: entropy, permutation entropy, shape moments.

All measures are computed on the unpadded core of an outbreak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import DegenerateError, InsufficientDataError, Outbreak


@dataclass(frozen=True)
class OutbreakMeasures:
    unique_id: str
    shannon_entropy_bits: float
    permutation_entropy_normalized: float
    permutation_entropy_bits: float
    skewness: float
    excess_kurtosis: float


def incidence_distribution(values: Sequence[float] | Outbreak) -> np.ndarray:
    x = np.asarray(values.core if isinstance(values, Outbreak) else values, dtype=float)
    total = x.sum()
    if not total > 0:
        raise DegenerateError("incidence distribution undefined for zero total")
    return x / total


def shannon_entropy(p: Sequence[float]) -> float:
    """Entropy in bits; zero-probability terms contribute nothing."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    h = -float(np.sum(nz * np.log2(nz)))
    # rounding can push a uniform distribution a few ulps past log2(support)
    return min(max(h, 0.0), math.log2(nz.size)) if nz.size else 0.0


def ordinal_pattern_distribution(x: Sequence[float], order: int = 3, delay: int = 1) -> dict[int, float]:
    codes = kernels.ordinal_codes(np.asarray(x, dtype=float), order, delay)
    ids, counts = np.unique(codes, return_counts=True)
    return {int(i): c / codes.size for i, c in zip(ids, counts)}


def permutation_entropy(
    x: Sequence[float], order: int = 3, delay: int = 1, normalized: bool = True
) -> float:
    """Entropy of ordinal patterns; ties rank the earlier sample lower."""
    x = np.asarray(x, dtype=float)
    if order < 2 or delay < 1:
        raise ValueError("need order >= 2 and delay >= 1")
    if x.size < order * delay + 1:
        raise InsufficientDataError(f"series of length {x.size} too short for order {order}")
    codes = kernels.ordinal_codes(x, order, delay)
    _, counts = np.unique(codes, return_counts=True)
    pe = shannon_entropy(counts / codes.size)
    if normalized:
        pe = min(pe / math.log2(math.factorial(order)), 1.0)
    return pe


def shape_moments(values: Sequence[float] | Outbreak) -> tuple[float, float]:
    """Skewness and excess kurtosis of the week index weighted by incidence."""
    p = incidence_distribution(values)
    t = np.arange(p.size, dtype=float)
    mu = float(np.dot(t, p))
    dev = t - mu
    var = float(np.dot(dev**2, p))
    if not var > 0:
        raise DegenerateError("shape moments undefined for a single-week distribution")
    sd = math.sqrt(var)
    skew = float(np.dot(dev**3, p)) / sd**3
    kurt = float(np.dot(dev**4, p)) / var**2 - 3.0
    return skew, kurt


def measure_outbreak(o: Outbreak, order: int = 3, delay: int = 1) -> OutbreakMeasures:
    core = o.core
    p = incidence_distribution(core)
    skew, kurt = shape_moments(core)
    pe_bits = permutation_entropy(core, order, delay, normalized=False)
    return OutbreakMeasures(
        unique_id=o.unique_id,
        shannon_entropy_bits=shannon_entropy(p),
        permutation_entropy_normalized=min(pe_bits / math.log2(math.factorial(order)), 1.0),
        permutation_entropy_bits=pe_bits,
        skewness=skew,
        excess_kurtosis=kurt,
    )


def histogram_rows(
    measures: Sequence[OutbreakMeasures], groups: Sequence[str], bins: int = 20
) -> list[dict]:
    """Per-group histogram counts of each measure, on bin edges shared across groups."""
    fields = ("shannon_entropy_bits", "permutation_entropy_normalized", "skewness", "excess_kurtosis")
    rows = []
    labels = sorted(set(groups))
    for name in fields:
        vals = np.array([getattr(m, name) for m in measures], dtype=float)
        if vals.size == 0:
            continue
        edges = np.histogram_bin_edges(vals, bins=bins)
        for label in labels:
            sel = vals[[g == label for g in groups]]
            counts, _ = np.histogram(sel, bins=edges)
            for i, c in enumerate(counts):
                rows.append(
                    {
                        "measure": name,
                        "group": label,
                        "bin_left": float(edges[i]),
                        "bin_right": float(edges[i + 1]),
                        "count": int(c),
                    }
                )
    return rows
