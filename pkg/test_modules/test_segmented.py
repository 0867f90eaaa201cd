#!/usr/bin/env python3
"""
Test script for the segmented regression module.

Usage:
    python test_segmented.py
"""

import os
import sys
import logging
from datetime import date, timedelta
from itertools import combinations

import numpy as np
import pytest

# Configure logging
logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# Add the parent directory to the system path to import the activity_shift package
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from activity_shift.exceptions import DegenerateInputError, ValidationError, WindowTooShortError
from activity_shift.modules.segmented import (
    Jump, SegmentedFit, aggregate_jumps, breakpoint_count_histogram, fit_segments,
    jump_ratio, relative_jumps, select_fit,
)
from activity_shift.modules.timeline import AnalysisWindow, DailySeries
from test_modules.harness import collect, run_module_tests

START = date(2020, 1, 1)


def series_of(counts) -> DailySeries:
    counts = np.asarray(counts)
    return DailySeries(AnalysisWindow(START, START + timedelta(days=len(counts))), counts)


def brute_force(counts, k, min_len):
    """Lexicographically smallest RSS-optimal placement by enumerating every admissible one."""
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    results = []
    for breaks in combinations(range(min_len, n - min_len + 1), k):
        edges = (0, *breaks, n)
        if any(b - a < min_len for a, b in zip(edges, edges[1:])):
            continue
        rss = sum(float(((counts[a:b] - counts[a:b].mean()) ** 2).sum()) for a, b in zip(edges, edges[1:]))
        results.append((rss, breaks))
    best = min(r for r, _ in results)
    tolerance = 1e-9 * max(1.0, best)
    return best, min(b for r, b in results if r <= best + tolerance)


def test_constant_counts_k0():
    fit = fit_segments(series_of([3] * 100), 0)
    assert fit.rates == (3.0,)
    assert fit.rss == pytest.approx(0.0, abs=1e-9)
    assert fit.k == 0


def test_noiseless_step_k1():
    fit = fit_segments(series_of([2] * 50 + [8] * 50), 1)
    assert fit.breakpoints == (50,)
    assert fit.rates == pytest.approx((2.0, 8.0))
    assert fit.rss == pytest.approx(0.0, abs=1e-9)
    assert fit.breakpoint_days == [START + timedelta(days=50)]


def test_constant_counts_tie_goes_to_earliest():
    fit = fit_segments(series_of([4] * 40), 1, min_segment_len=7)
    assert fit.breakpoints == (7,)
    assert fit.rates[0] == fit.rates[1]


def test_window_too_short():
    with pytest.raises(WindowTooShortError):
        fit_segments(series_of([1] * 20), 2, min_segment_len=7)
    with pytest.raises(WindowTooShortError):
        select_fit(series_of([1] * 5), min_segment_len=7)
    with pytest.raises(ValidationError):
        fit_segments(series_of([1] * 20), -1)


def test_matches_brute_force():
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n = int(rng.integers(15, 61))
        counts = rng.poisson(rng.uniform(0.5, 6.0), size=n)
        if trial % 2:
            counts[n // 2:] += rng.poisson(3.0, size=n - n // 2)
        for k in range(3):
            min_len = 3 if trial % 3 else 5
            if n < (k + 1) * min_len:
                continue
            rss, breaks = brute_force(counts, k, min_len)
            fit = fit_segments(series_of(counts), k, min_segment_len=min_len)
            assert fit.breakpoints == breaks, (trial, k)
            assert fit.rss == pytest.approx(rss, rel=1e-9, abs=1e-9)


def test_rss_non_increasing_in_k():
    rng = np.random.default_rng(7)
    series = series_of(rng.poisson(4.0, size=90))
    values = [fit_segments(series, k, 5).rss for k in range(6)]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_select_fit_prefers_k0_on_constant_rate():
    selected = sum(select_fit(series_of(np.random.default_rng(seed).poisson(3.0, size=200))).k == 0
                   for seed in range(100))
    assert selected >= 90


def test_select_fit_on_noiseless_steps():
    assert select_fit(series_of([2] * 50 + [8] * 50)).k == 1
    fit = select_fit(series_of([2] * 60 + [8] * 60 + [4] * 60))
    assert fit.k == 2
    assert fit.breakpoints == (60, 120)


def test_select_fit_caps_k_to_window():
    fit = select_fit(series_of([1] * 10 + [9] * 10), k_max=5, min_segment_len=7)
    assert fit.k <= 1


def test_breakpoint_recovery():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        counts = np.concatenate([rng.poisson(2.0, 60), rng.poisson(8.0, 60)])
        fit = select_fit(series_of(counts))
        hits += any(abs(b - 60) <= 2 for b in fit.breakpoints)
    assert hits >= 95


def test_relative_jumps():
    fit = fit_segments(series_of([2] * 50 + [8] * 50), 1)
    jumps = relative_jumps(fit, 5.0, "u")
    assert len(jumps) == 1
    assert jumps[0].magnitude == pytest.approx(1.2, abs=1e-9)
    assert jumps[0].day == START + timedelta(days=50)
    down = relative_jumps(fit_segments(series_of([8] * 50 + [2] * 50), 1), 5.0, "u")
    assert down[0].magnitude == pytest.approx(-1.2, abs=1e-9)
    assert relative_jumps(fit_segments(series_of([3] * 30), 0), 3.0, "u") == []
    with pytest.raises(DegenerateInputError):
        relative_jumps(fit, 0.0, "u")


def test_jumps_scale_invariant():
    rng = np.random.default_rng(8)
    series = series_of(np.concatenate([rng.poisson(2.0, 70), rng.poisson(7.0, 70)]))
    scaled = series.scaled(3)
    fit, fit_scaled = fit_segments(series, 1), fit_segments(scaled, 1)
    assert fit.breakpoints == fit_scaled.breakpoints
    m = series.counts.mean()
    jumps = relative_jumps(fit, m, "u")
    scaled_jumps = relative_jumps(fit_scaled, scaled.counts.mean(), "u")
    assert [j.magnitude for j in jumps] == pytest.approx([j.magnitude for j in scaled_jumps], rel=1e-9)


def test_time_reversal_negates_jumps():
    series = series_of([2] * 60 + [8] * 60 + [4] * 60)
    m = series.counts.mean()
    forward = relative_jumps(fit_segments(series, 2), m, "u")
    backward = relative_jumps(fit_segments(series.reversed(), 2), m, "u")
    assert [j.magnitude for j in backward] == pytest.approx([-j.magnitude for j in reversed(forward)])
    n = series.n
    assert [series.window.index_of(j.day) for j in backward] == [n - series.window.index_of(j.day)
                                                                for j in reversed(forward)]


def test_aggregate_jumps():
    window = AnalysisWindow(START, START + timedelta(days=10))
    day = START + timedelta(days=3)
    both_up = aggregate_jumps([Jump("a", day, 1.2), Jump("b", day, 1.2)], window)
    assert both_up.j_plus[3] == pytest.approx(2.4)
    assert both_up.j_minus[3] == 0
    mixed = aggregate_jumps([Jump("a", day, 1.2), Jump("b", day, -0.6)], window)
    assert (mixed.j_plus[3], mixed.j_minus[3]) == pytest.approx((1.2, -0.6))
    empty = aggregate_jumps([], window)
    assert not empty.j_plus.any() and not empty.j_minus.any()
    with pytest.raises(ValidationError):
        aggregate_jumps([Jump("a", START + timedelta(days=10), 1.0)], window)


def test_aggregate_jumps_conservation():
    rng = np.random.default_rng(12)
    window = AnalysisWindow(START, START + timedelta(days=30))
    jumps = [Jump(f"u{i}", START + timedelta(days=int(rng.integers(30))), float(rng.normal())) for i in range(200)]
    series = aggregate_jumps(jumps, window)
    assert series.j_plus.sum() == pytest.approx(sum(j.magnitude for j in jumps if j.magnitude > 0))
    assert series.j_minus.sum() == pytest.approx(sum(j.magnitude for j in jumps if j.magnitude < 0))


def test_jump_ratio():
    window = AnalysisWindow(START, START + timedelta(days=3))
    series = aggregate_jumps([Jump("a", START, 1.2), Jump("b", START, -0.6),
                              Jump("c", START + timedelta(days=1), 0.5)], window)
    assert jump_ratio(series) == [pytest.approx(0.5), 0.0, None]


def test_breakpoint_count_histogram():
    window = AnalysisWindow(START, START + timedelta(days=30))
    fits = [SegmentedFit(window, (5, 10), (1.0, 2.0, 3.0), 0.0, 0.0) for _ in range(4)]
    assert breakpoint_count_histogram(fits) == {0: 0.0, 1: 0.0, 2: 1.0}
    assert breakpoint_count_histogram([]) == {}
    assert breakpoint_count_histogram(fits, k_max=5)[5] == 0.0


def test_breakpoint_histogram_mode_on_switched_population():
    fits = []
    for seed in range(30):
        rng = np.random.default_rng(seed)
        fits.append(select_fit(series_of(np.concatenate([rng.poisson(2.0, 80), rng.poisson(6.0, 80)]))))
    histogram = breakpoint_count_histogram(fits, k_max=5)
    assert max(histogram, key=histogram.get) == 1


def run_tests():
    """Run all segmented regression module tests."""
    return run_module_tests("segmented", collect(globals()))


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
