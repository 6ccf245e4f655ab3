import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outbreakbench.analytics import (
    histogram_rows,
    incidence_distribution,
    measure_outbreak,
    ordinal_pattern_distribution,
    permutation_entropy,
    shannon_entropy,
    shape_moments,
)
from outbreakbench.core import DegenerateError, InsufficientDataError

# a length-8 sequence whose six windows show every order-3 pattern once
ALL_PATTERNS = (0, 1, 5, 4, 3, 7, 2, 6)


def brute_pe(x, order, normalized=True):
    """Count patterns by exhaustive comparison; earlier sample wins ties."""
    perms = list(itertools.permutations(range(order)))
    counts = Counter()
    for i in range(len(x) - order + 1):
        w = x[i : i + order]
        for perm in perms:
            if all((w[perm[j]], perm[j]) <= (w[perm[j + 1]], perm[j + 1]) for j in range(order - 1)):
                counts[perm] += 1
                break
    total = sum(counts.values())
    h = -sum(c / total * math.log2(c / total) for c in counts.values())
    return h / math.log2(math.factorial(order)) if normalized else h


def test_entropy_examples():
    assert shannon_entropy([1.0]) == 0.0
    assert shannon_entropy([0.5, 0.5]) == 1.0
    assert shannon_entropy([0.25] * 4) == 2.0
    assert shannon_entropy([0.5, 0.5, 0.0]) == 1.0


def test_entropy_equality_cases():
    for T in (8, 13, 52):
        spike = np.zeros(T)
        spike[T // 2] = 9.0
        assert shannon_entropy(incidence_distribution(spike)) == 0.0
        assert shannon_entropy(incidence_distribution(np.full(T, 3.0))) == pytest.approx(math.log2(T), abs=1e-12)


@given(st.lists(st.floats(0, 1e5), min_size=8, max_size=52).filter(lambda v: sum(v) > 0))
def test_entropy_bounds(vals):
    h = shannon_entropy(incidence_distribution(vals))
    assert 0.0 <= h <= math.log2(len(vals))


def test_zero_total_is_degenerate():
    with pytest.raises(DegenerateError):
        incidence_distribution([0, 0, 0])


def test_permutation_entropy_examples():
    assert permutation_entropy(np.arange(10.0)) == 0.0
    assert permutation_entropy(np.arange(10.0)[::-1]) == 0.0
    assert permutation_entropy(ALL_PATTERNS) == pytest.approx(1.0, abs=1e-12)
    assert permutation_entropy(ALL_PATTERNS, normalized=False) == pytest.approx(math.log2(6), abs=1e-12)
    # ties rank the earlier sample lower, so a constant run reads as increasing
    assert permutation_entropy([4.0] * 9) == 0.0


def test_permutation_entropy_length_rule():
    with pytest.raises(InsufficientDataError):
        permutation_entropy([1, 2, 3])
    assert permutation_entropy([1, 3, 2, 4]) >= 0
    with pytest.raises(ValueError):
        permutation_entropy([1, 2, 3, 4], order=1)


@given(
    st.lists(st.integers(0, 4), min_size=7, max_size=15),
    st.sampled_from([2, 3]),
)
@settings(max_examples=200)
def test_permutation_entropy_matches_brute_force_with_ties(x, order):
    assert abs(permutation_entropy(x, order) - brute_pe(x, order)) <= 1e-12


def test_pattern_distribution_sums_to_one():
    d = ordinal_pattern_distribution(ALL_PATTERNS)
    assert len(d) == 6 and sum(d.values()) == pytest.approx(1.0)


def test_shape_moments_symmetric_and_skewed():
    skew, kurt = shape_moments([1, 2, 3, 2, 1])
    assert skew == pytest.approx(0.0, abs=1e-12)
    # uniform over 0..T-1 has the discrete-uniform kurtosis
    T = 20
    _, k = shape_moments(np.ones(T))
    assert k == pytest.approx(-6 * (T**2 + 1) / (5 * (T**2 - 1)), abs=1e-12)
    early, _ = shape_moments([9, 6, 3, 2, 1, 1, 0, 0])
    assert early > 0
    with pytest.raises(DegenerateError):
        shape_moments([0, 5, 0])


def test_measure_outbreak_uses_core(outbreak_factory):
    core = [1, 3, 7, 12, 9, 5, 3, 1]
    o = outbreak_factory([50, 50] + core + [50, 50], core=(2, 9))
    m = measure_outbreak(o)
    assert m.shannon_entropy_bits == shannon_entropy(incidence_distribution(core))
    assert m.skewness == shape_moments(core)[0]
    assert m.permutation_entropy_normalized == pytest.approx(brute_pe(core, 3), abs=1e-12)
    assert m.permutation_entropy_bits == pytest.approx(brute_pe(core, 3, normalized=False), abs=1e-12)


def test_histogram_rows_share_edges(outbreak_factory):
    from outbreakbench.analytics import OutbreakMeasures

    ms = [OutbreakMeasures(str(i), float(i), 0.5, 0.0, 0.0, 0.0) for i in range(10)]
    rows = histogram_rows(ms, ["a"] * 5 + ["b"] * 5, bins=5)
    ent = [r for r in rows if r["measure"] == "shannon_entropy_bits"]
    assert sum(r["count"] for r in ent) == 10
    assert {(r["bin_left"], r["bin_right"]) for r in ent if r["group"] == "a"} == {
        (r["bin_left"], r["bin_right"]) for r in ent if r["group"] == "b"
    }
