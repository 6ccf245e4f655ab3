"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest summary.
Run directly (``python3 tests/test_acceptance.py``) to print the lines only.
"""

import datetime as dt
import hashlib
import itertools
import json
import math
import os
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from outbreakbench import forecasters
from outbreakbench.analytics import incidence_distribution, permutation_entropy, shannon_entropy
from outbreakbench.core import FormatError, SeriesKey
from outbreakbench.forecasters import QUANTILE_LEVELS, QuantileForecast, fit_ar, fit_flat
from outbreakbench.harness import HarnessConfig, issuance_windows, run_backtest, split_outbreaks
from outbreakbench.ingest import series_from_values
from outbreakbench.io import read_hubverse, read_outbreak_file, write_hubverse, write_outbreak_file
from outbreakbench.scoring import interval_score, wis, wis_many
from outbreakbench.segmentation import SegmentationConfig, detect_cutpoints, segment
from outbreakbench.synthetic import bundled_corpus_path, two_bump_values

sys.path.insert(0, str(Path(__file__).parent))
from conftest import make_outbreak  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"
RESULTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[n] = f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


# 1 ------------------------------------------------------------------------------


def pinball_mean(q, y):
    return sum(2 * ((1 - t) * (v - y) if y < v else t * (y - v)) for t, v in zip(QUANTILE_LEVELS, q)) / len(q)


def test_01_wis_equals_pinball():
    rng = np.random.default_rng(1)
    fcs, ys = [], []
    for i in range(1000):
        centre = rng.uniform(0, 1000)
        q = np.sort(centre + rng.normal(0, rng.uniform(0.1, 200), 23))
        if i % 10 == 0:
            q[5:12] = q[5]  # ties across levels
        fcs.append(QuantileForecast("x", "m", 0, 1, tuple(float(v) for v in q)))
        ys.append(float(rng.choice([rng.uniform(-50, 1100), q[rng.integers(23)]])))
    t0 = time.perf_counter()
    got = wis_many(fcs, ys)
    got_single = [wis(f, y) for f, y in zip(fcs, ys)]
    elapsed = time.perf_counter() - t0
    ref = np.array([pinball_mean(f.values, y) for f, y in zip(fcs, ys)])
    err = max(np.abs(got - ref).max(), np.abs(np.array(got_single) - ref).max())
    record(1, "WIS = mean quantile (pinball) score", err <= 1e-9 and elapsed < 5,
           f"max |diff| {err:.2e} over 1000 forecasts in {elapsed:.2f}s")


# 2 ------------------------------------------------------------------------------


def test_02_wis_arithmetic():
    checks = []
    # interval score: width plus 2/alpha times the miss distance
    checks.append(interval_score(2.0, 6.0, 0.5, 4.0) == 4.0)
    checks.append(interval_score(2.0, 6.0, 0.5, 1.0) == 4.0 + (2 / 0.5) * (2.0 - 1.0))
    checks.append(interval_score(2.0, 6.0, 0.5, 9.0) == 4.0 + (2 / 0.5) * (9.0 - 6.0))
    checks.append(interval_score(2.0, 6.0, 0.1, 2.0) == 4.0 and interval_score(2.0, 6.0, 0.1, 6.0) == 4.0)
    # a full forecast: quantiles 0..22 around median 11, y inside every interval
    q = tuple(float(i) for i in range(23))
    alphas = [round(2 * t, 10) for t in QUANTILE_LEVELS[:11]]
    widths = [22 - 2 * i for i in range(11)]
    inside = (0.5 * 0 + sum(a / 2 * w for a, w in zip(alphas, widths))) / 11.5
    checks.append(math.isclose(wis(QuantileForecast("x", "m", 0, 1, q), 11.0), inside, rel_tol=0, abs_tol=1e-12))
    # y below every lower bound
    y = -3.0
    below = (0.5 * 14 + sum(a / 2 * (w + 2 / a * (i - y)) for i, (a, w) in enumerate(zip(alphas, widths)))) / 11.5
    checks.append(math.isclose(wis(QuantileForecast("x", "m", 0, 1, q), y), below, abs_tol=1e-12))
    # y above every upper bound
    y = 30.0
    above = (0.5 * 19 + sum(a / 2 * (w + 2 / a * (y - (22 - i))) for i, (a, w) in enumerate(zip(alphas, widths)))) / 11.5
    checks.append(math.isclose(wis(QuantileForecast("x", "m", 0, 1, q), y), above, abs_tol=1e-12))
    # point mass at m scores |y - m|; a perfect forecast scores zero
    pm = QuantileForecast("x", "m", 0, 1, (7.0,) * 23)
    checks.append(math.isclose(wis(pm, 10.0), 3.0, abs_tol=1e-12))
    checks.append(wis(pm, 7.0) == 0.0)
    record(2, "WIS penalty arithmetic", all(checks), f"{sum(checks)}/{len(checks)} hand cases exact")


# 3 ------------------------------------------------------------------------------


def test_03_entropy_bounds():
    rng = np.random.default_rng(3)
    bad = 0
    for i in range(10_000):
        T = int(rng.integers(8, 53))
        kind = i % 4
        if kind == 0:
            x = rng.poisson(rng.uniform(0.5, 50), T).astype(float)
        elif kind == 1:
            x = rng.exponential(10, T)
        elif kind == 2:
            x = np.round(100 * np.exp(-0.5 * ((np.arange(T) - rng.uniform(0, T)) / rng.uniform(1, T)) ** 2))
        else:
            x = rng.integers(0, 3, T).astype(float)
        if x.sum() == 0:
            x[0] = 1.0
        h = shannon_entropy(incidence_distribution(x))
        pe = permutation_entropy(x)
        bad += not (0 <= h <= math.log2(T)) or not (0 <= pe <= 1)
    spike = np.zeros(30)
    spike[12] = 5
    eq = [
        shannon_entropy(incidence_distribution(spike)) == 0.0,
        all(shannon_entropy(incidence_distribution(np.full(T, 4.0))) == pytest.approx(math.log2(T), abs=1e-12) for T in range(8, 53)),
        permutation_entropy(np.arange(20.0)) == 0.0,
        permutation_entropy(np.arange(20.0)[::-1]) == 0.0,
        permutation_entropy([0, 1, 5, 4, 3, 7, 2, 6]) == pytest.approx(1.0, abs=1e-12),
    ]
    record(3, "Entropy bounds", bad == 0 and all(eq), f"{bad} bound violations in 10000 outbreaks; {sum(eq)}/{len(eq)} equality cases hit")


# 4 ------------------------------------------------------------------------------


def exhaustive_pe(x, order):
    perms = list(itertools.permutations(range(order)))
    counts = Counter()
    for i in range(len(x) - order + 1):
        w = x[i : i + order]
        # the ordering that sorts the window, earlier index first on ties
        match = [p for p in perms if all((w[p[j]], p[j]) < (w[p[j + 1]], p[j + 1]) for j in range(order - 1))]
        assert len(match) == 1
        counts[match[0]] += 1
    n = sum(counts.values())
    return -sum(c / n * math.log2(c / n) for c in counts.values()) / math.log2(math.factorial(order))


def test_04_permutation_entropy_oracle():
    rng = np.random.default_rng(4)
    worst, n_tied = 0.0, 0
    for i in range(500):
        L = int(rng.integers(7, 16))
        x = rng.integers(0, 4, L).astype(float) if i % 2 else rng.normal(size=L)
        n_tied += len(set(x)) < L
        for order in (2, 3):
            worst = max(worst, abs(permutation_entropy(x, order) - exhaustive_pe(list(x), order)))
    record(4, "Permutation entropy vs exhaustive counting", worst <= 1e-12,
           f"max |diff| {worst:.1e} over 500 series ({n_tied} with ties), orders 2 and 3")


# 5 ------------------------------------------------------------------------------


def test_05_segmentation_synthetics():
    key = SeriesKey("MEASLES", "NY", "CASES")
    start = dt.date(2015, 1, 3)
    notes, ok = [], True
    for sigma in (1.0, 2.0, 3.0):
        cfg = SegmentationConfig(kernel_bandwidth_weeks=sigma)
        s = series_from_values(key, start, list(two_bump_values()))
        obs = segment(s, cfg)
        cuts = detect_cutpoints(s.values, cfg).accepted
        good = len(obs) == 2 and len(cuts) == 1 and abs(cuts[0] - 20) <= 1
        ok &= good
        notes.append(f"sigma={sigma:g}: {len(obs)} outbreaks, cut {list(cuts)}")
    spike = segment(series_from_values(key, start, [1, 8, 40, 90, 40, 8, 1]))
    rise = segment(series_from_values(key, start, list(np.arange(1.0, 61.0))))
    ok &= spike == [] and rise == []
    notes.append(f"5-week spike: {len(spike)}; 60-week rise: {len(rise)}")
    record(5, "Segmentation on synthetics", ok, "; ".join(notes))


# 6 ------------------------------------------------------------------------------


def test_06_no_leakage(monkeypatch):
    rng = np.random.default_rng(6)
    seen = []

    def spy(history):
        seen.append(np.array(history, dtype=float))
        return fit_flat(history)

    monkeypatch.setitem(forecasters.MODELS, "spy", spy)
    violations = n_forecasts = 0
    for i in range(200):
        n = int(rng.integers(8, 61))
        o = make_outbreak(rng.poisson(rng.uniform(1, 80), n).astype(float), uid=f"F_L_CASES_{i}")
        seen.clear()
        res = run_backtest([o], "spy", workers=1)
        prefix_end = {}
        for u, _ in issuance_windows(o):
            hist = seen.pop(0)
            prefix_end[u] = hist.size - 1
            violations += not np.array_equal(hist, o.values[: u + 1])
        for f in res.forecasts:
            n_forecasts += 1
            violations += not (f.target_index > prefix_end[f.issuance_week_index] == f.issuance_week_index)
        if i % 20 == 0:
            for f in run_backtest([o], "ar", workers=1).forecasts:
                n_forecasts += 1
                violations += not (o.duration > f.target_index > f.issuance_week_index)
    record(6, "No leakage", violations == 0, f"{violations} violations over {n_forecasts} forecasts from 200 outbreaks")


# 7 ------------------------------------------------------------------------------


def simulate_ar1(phi, seed, n=200, burn=100):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=n + burn)
    x = np.zeros(n + burn)
    for t in range(1, n + burn):
        x[t] = phi * x[t - 1] + e[t]
    return x[burn:]


def test_07_ar_recovery():
    notes, ok = [], True
    for phi in (0.5, 0.8):
        hits = 0
        for seed in range(50):
            m = fit_ar(simulate_ar1(phi, seed), max_p=1, d_values=(0,))
            hits += m.params["p"] == 1 and abs(m.params["coefs"][0] - phi) <= 0.1
        ok &= hits >= 45
        notes.append(f"phi={phi}: {hits}/50 within 0.1")
    ratios = []
    for seed in range(50):
        walk = np.cumsum(np.random.default_rng(1000 + seed).normal(size=200))
        v = fit_ar(walk).variance_multipliers(4)
        ratios.append(v[3] / v[0])
    mean_ratio = float(np.mean(ratios))
    ok &= abs(mean_ratio - 4) <= 0.25 * 4
    notes.append(f"random walk Var4/Var1 mean {mean_ratio:.2f}")
    record(7, "AR recovery", ok, "; ".join(notes))


# 8 ------------------------------------------------------------------------------


def enumerate_targets(duration, min_history=8, h=4):
    return [
        (u, k)
        for u in range(duration)
        for k in range(1, h + 1)
        if u + 1 >= min_history and all(u + j < duration for j in range(1, h + 1))
    ]


def test_08_window_counting():
    ok, notes = True, []
    for d in (12, 20, 60):
        got = [(u, k) for u, ks in issuance_windows(d) for k in ks]
        ok &= got == enumerate_targets(d)
        notes.append(f"{d}: {len(issuance_windows(d))} windows / {len(got)} targets")
    ok &= len(issuance_windows(60)) == 49 and len(enumerate_targets(60)) == 196
    record(8, "Expanding-window counting", ok, "; ".join(notes))


# 9 ------------------------------------------------------------------------------

GOLDEN_FILES = ("forecasts/flat.csv", "forecasts/ets.csv", "forecasts/ar.csv", "scores/scores.csv", "outbreaks.csv")


def _run_pipeline(out: Path, env_extra: dict) -> float:
    env = {**os.environ, **env_extra}
    cmd = [sys.executable, "-m", "outbreakbench", "run", str(bundled_corpus_path().with_name("manifest.csv")),
           "--out", str(out), "--split", "all", "--models", "flat,ets,ar"]
    t0 = time.perf_counter()
    subprocess.run(cmd, check=True, env=env, capture_output=True)
    return time.perf_counter() - t0


def _hashes(out: Path) -> dict:
    return {name: hashlib.sha256((out / name).read_bytes()).hexdigest() for name in GOLDEN_FILES}


def test_09_golden_run(tmp_path):
    t_first = _run_pipeline(tmp_path / "a", {})
    t_second = _run_pipeline(tmp_path / "b", {"OUTBREAKBENCH_DISABLE_NUMBA": "1"})
    a, b = _hashes(tmp_path / "a"), _hashes(tmp_path / "b")
    frozen = json.loads((GOLDEN / "golden_hashes.json").read_text())
    n_outbreaks = len(read_outbreak_file(tmp_path / "a" / "outbreaks.csv").outbreaks)
    ok = a == b == frozen and max(t_first, t_second) < 60
    mismatched = sorted(k for k in frozen if a.get(k) != frozen[k] or b.get(k) != frozen[k])
    record(9, "End-to-end golden run", ok,
           f"{n_outbreaks} outbreaks; reruns identical={a == b}; golden mismatches {mismatched or 'none'}; "
           f"runtime {t_first:.1f}s (accelerated) / {t_second:.1f}s (numpy)")


# 10 -----------------------------------------------------------------------------


def test_10_split_arithmetic():
    ids = [f"outbreak_{i:05d}" for i in range(10_799)]
    cfg = HarnessConfig(split_seed=2024)
    first = split_outbreaks(ids, cfg)
    again = split_outbreaks(list(reversed(ids)), cfg)
    sizes = tuple(len(s) for s in first)
    disjoint = not (set(first[0]) & set(first[1]) or set(first[0]) & set(first[2]) or set(first[1]) & set(first[2]))
    ok = sizes == (6481, 2159, 2159) and first == again and disjoint
    record(10, "Split determinism and arithmetic", ok, f"sizes {sizes}, reruns identical={first == again}")


# 11 -----------------------------------------------------------------------------


def _random_outbreak(rng, i):
    core = int(rng.integers(8, 53))
    left = int(rng.integers(0, 5))
    right = int(rng.integers(0, min(4, 60 - core - left) + 1))
    n = left + core + right
    vals = rng.choice([rng.uniform(0, 1e5, n), np.round(rng.exponential(30, n)), rng.integers(0, 3, n) * 1.0])
    start = dt.date(1990, 1, 6) + dt.timedelta(weeks=int(rng.integers(0, 1800)))
    return make_outbreak(vals, uid=f"D{i % 7}_L{i % 5}_CASES_{i}", core=(left, left + core - 1), start=start)


def test_11_format_round_trips(tmp_path):
    rng = np.random.default_rng(11)
    obs = [_random_outbreak(rng, i) for i in range(1000)]
    p = tmp_path / "outbreaks.csv"
    write_outbreak_file(obs, p)
    res = read_outbreak_file(p)
    by_id = {o.unique_id: o for o in obs}
    ob_ok = not res.rejected and len(res.outbreaks) == 1000 and all(o.equals(by_id[o.unique_id]) for o in res.outbreaks)
    first = p.read_bytes()
    write_outbreak_file(res.outbreaks, p)
    ob_ok &= p.read_bytes() == first

    fcs = []
    for i, o in enumerate(obs):
        q = np.sort(rng.uniform(0, 1e4, 23))
        if i % 3 == 0:
            q[:4] = 0.0
        fcs.append(QuantileForecast(o.unique_id, "m", int(rng.integers(0, o.duration - 1)), int(rng.integers(1, 5)), tuple(float(v) for v in q)))
    h = tmp_path / "hub.csv"
    write_hubverse(fcs, by_id, h)
    back = read_hubverse(h, by_id)
    hub_ok = back == sorted(fcs, key=QuantileForecast.sort_key)
    hub_bytes = h.read_bytes()
    write_hubverse(back, by_id, h)
    hub_ok &= h.read_bytes() == hub_bytes

    # malformed inputs
    lines = hub_bytes.decode().splitlines()
    rejects = []
    h.write_text("\n".join([lines[0]] + [l for l in lines[1:24] if ",0.25," not in l]) + "\n")
    try:
        read_hubverse(h)
        rejects.append(False)
    except FormatError as exc:
        rejects.append("missing level(s) 0.25" in str(exc))
    cols = lines[1].split(",")
    cols[3] = (dt.date.fromisoformat(cols[3]) - dt.timedelta(days=1)).isoformat()
    h.write_text("\n".join([lines[0], ",".join(cols)] + lines[2:24]) + "\n")
    try:
        read_hubverse(h)
        rejects.append(False)
    except FormatError as exc:
        rejects.append("not a Saturday" in str(exc))
    rows = first.decode().splitlines()
    neg = rows[1].split(",")
    neg[7] = "-1.0"
    bad_date = rows[2].split(",")
    bad_date[4] = (dt.date.fromisoformat(bad_date[4]) + dt.timedelta(days=1)).isoformat()
    p.write_text("\n".join([rows[0], ",".join(neg), ",".join(bad_date)] + rows[3:]) + "\n")
    res = read_outbreak_file(p)
    reasons = dict(res.rejected)
    rejects.append(len(res.outbreaks) == 998 and "non-negativity" in reasons.get(2, ""))
    rejects.append("not a Saturday" in reasons.get(3, ""))
    ok = ob_ok and hub_ok and all(rejects)
    record(11, "Format round trips", ok,
           f"outbreak file identity={ob_ok}, quantile file identity={hub_ok}, {sum(rejects)}/{len(rejects)} malformed inputs rejected")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
