#!/usr/bin/env python3
"""
Test script for the activity metrics module.

Usage:
    python test_metrics.py
"""

import os
import sys
import math
import logging
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

# Configure logging
logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# Add the parent directory to the system path to import the activity_shift package
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from activity_shift.exceptions import DegenerateInputError, InsufficientDataError, ValidationError
from activity_shift.modules.metrics import (
    Histogram, UserActivityPoint, activity_point, bootstrap_median_ci, box_summary,
    build_histogram, class_divergence_matrix, kl_divergence, replicated_fraction, source_entropy,
)
from activity_shift.modules.timeline import Event, EventKind, Timeline, UserClass
from test_modules.harness import collect, run_module_tests

START = datetime(2020, 3, 1, tzinfo=timezone.utc)


def make_timeline(originals=0, sources=(), user_id="u", user_class=UserClass.GENERIC) -> Timeline:
    """Timeline with `originals` original posts followed by one retweet per entry of `sources`."""
    events = [Event(START + timedelta(minutes=i)) for i in range(originals)]
    events += [Event(START + timedelta(hours=1, minutes=i), EventKind.RETWEET, s) for i, s in enumerate(sources)]
    return Timeline(user_id, user_class, tuple(events))


def two_bin(p) -> Histogram:
    return Histogram((0.0, 1.0), np.array([0.0, 0.5, 1.0]), np.array(p, dtype=float))


def test_replicated_fraction():
    assert replicated_fraction(make_timeline(6, "abcd")) == pytest.approx(0.4, abs=1e-12)
    assert replicated_fraction(make_timeline(3)) == 0.0
    assert replicated_fraction(make_timeline(0, "ab")) == 1.0
    with pytest.raises(DegenerateInputError):
        replicated_fraction(make_timeline())


def test_source_entropy():
    assert source_entropy(make_timeline(0, "abcd")) == pytest.approx(1.0, abs=1e-12)
    assert source_entropy(make_timeline(0, "aaaaa")) == pytest.approx(0.0, abs=1e-12)
    assert source_entropy(make_timeline(0, "aabb")) == pytest.approx(0.5, abs=1e-9)
    assert source_entropy(make_timeline(3, "a")) is None
    assert source_entropy(make_timeline(3)) is None


def test_source_entropy_relabeling_invariance():
    assert source_entropy(make_timeline(0, "aabbbc")) == pytest.approx(source_entropy(make_timeline(0, "xxyyyz")),
                                                                       abs=1e-15)


def test_activity_point():
    point = activity_point(make_timeline(6, "abab"))
    assert (point.total, point.retweets) == (10, 4)
    assert point.rho == pytest.approx(0.4, abs=1e-9)
    assert point.h == pytest.approx(0.5, abs=1e-9)
    single = activity_point(make_timeline(1))
    assert (single.total, single.retweets, single.rho, single.h) == (1, 0, 0.0, None)
    pair = activity_point(make_timeline(0, "ab"))
    assert pair.rho == 1.0 and pair.h == pytest.approx(1.0)


def test_metric_ranges_on_random_timelines():
    rng = np.random.default_rng(5)
    for i in range(200):
        originals = int(rng.integers(0, 20))
        sources = [f"s{int(s)}" for s in rng.integers(0, 6, size=int(rng.integers(0, 20)))]
        timeline = make_timeline(originals, sources)
        if not timeline.events:
            continue
        point = activity_point(timeline)
        assert 0.0 <= point.rho <= 1.0
        assert point.retweets <= point.total
        if point.h is not None:
            assert 0.0 <= point.h <= 1.0
        if point.rho == 0:
            assert point.h is None


def test_build_histogram():
    hist = build_histogram([0.1, 0.9], bins=2, epsilon=1e-12)
    assert hist.probabilities == pytest.approx([0.5, 0.5], abs=1e-9)
    same = build_histogram([0.3] * 10, bins=4)
    assert same.probabilities.max() == pytest.approx(1.0, abs=1e-8)
    assert np.all(same.probabilities > 0)
    uniform = build_histogram(np.random.default_rng(0).uniform(size=1000), bins=10)
    assert np.all(np.abs(uniform.probabilities - 0.1) <= 0.05)
    assert abs(uniform.probabilities.sum() - 1.0) <= 1e-12


def test_build_histogram_errors():
    with pytest.raises(ValidationError):
        build_histogram([0.5], bins=1)
    with pytest.raises(ValidationError):
        build_histogram([1.5])
    with pytest.raises(ValidationError):
        build_histogram([])
    with pytest.raises(ValidationError):
        build_histogram([0.5], epsilon=0)


def test_kl_divergence_values():
    assert kl_divergence(two_bin([0.5, 0.5]), two_bin([0.5, 0.5])) == 0.0
    expected = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert kl_divergence(two_bin([0.5, 0.5]), two_bin([0.9, 0.1])) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(0.5108, abs=1e-4)
    assert kl_divergence(two_bin([1.0, 0.0]), two_bin([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-9)


def test_kl_divergence_mismatched_edges():
    other = Histogram((0.0, 1.0), np.array([0.0, 0.4, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValidationError):
        kl_divergence(two_bin([0.5, 0.5]), other)


def test_gibbs_inequality_on_random_histograms():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        p = build_histogram(rng.uniform(size=int(rng.integers(2, 40))), bins=10)
        q = build_histogram(rng.beta(2, 5, size=int(rng.integers(2, 40))), bins=10)
        assert kl_divergence(p, q) >= 0.0
        assert kl_divergence(p, p) == 0.0


def points(values, user_class):
    return [UserActivityPoint(f"{user_class.value}{i}", user_class, 10, 5, v, None) for i, v in enumerate(values)]


def test_class_divergence_matrix_identical_classes():
    values = [0.1, 0.4, 0.4, 0.8]
    classes, matrix = class_divergence_matrix(
        {UserClass.JOURNALIST: points(values, UserClass.JOURNALIST),
         UserClass.POLITICIAN: points(values, UserClass.POLITICIAN)})
    assert classes == [UserClass.JOURNALIST, UserClass.POLITICIAN]
    assert np.allclose(matrix, 0.0)


def test_class_divergence_matrix_uniform_vs_beta():
    rng = np.random.default_rng(3)
    grouped = {
        UserClass.RANDOM_FOLLOWER: points(rng.uniform(size=10000), UserClass.RANDOM_FOLLOWER),
        UserClass.POLITICIAN: points(rng.beta(5, 1, size=10000), UserClass.POLITICIAN),
    }
    _, matrix = class_divergence_matrix(grouped, "rho")
    assert np.all(np.diag(matrix) == 0)
    assert matrix[0, 1] > 0.3 and matrix[1, 0] > 0.3


def test_class_divergence_matrix_too_few_values():
    grouped = {
        UserClass.JOURNALIST: points([0.1, 0.2], UserClass.JOURNALIST),
        UserClass.POLITICIAN: points([0.3], UserClass.POLITICIAN),
    }
    with pytest.raises(InsufficientDataError) as info:
        class_divergence_matrix(grouped, "rho")
    assert info.value.user_class == "politician"
    with pytest.raises(InsufficientDataError):
        class_divergence_matrix(grouped, "h")


def test_bootstrap_median_ci():
    assert bootstrap_median_ci([7] * 20, seed=1) == (7.0, 7.0, 7.0)
    median, low, high = bootstrap_median_ci([1, 2, 3, 4, 5], seed=2)
    assert median == 3 and 1 <= low <= median <= high <= 5
    sample = np.random.default_rng(4).standard_normal(10000)
    median, low, high = bootstrap_median_ci(sample, seed=5)
    assert abs(median) < 0.05
    assert high - low < 0.06
    assert low <= median <= high


def test_bootstrap_is_deterministic():
    values = np.random.default_rng(9).exponential(size=300)
    assert bootstrap_median_ci(values, seed=42) == bootstrap_median_ci(values, seed=42)
    with pytest.raises(ValidationError):
        bootstrap_median_ci([])


def test_box_summary():
    summary = box_summary(list(range(101)), resamples=200, seed=0)
    assert summary["median"] == 50
    assert summary["p05"] == pytest.approx(5.0)
    assert summary["p95"] == pytest.approx(95.0)
    assert summary["n"] == 101


def run_tests():
    """Run all metrics module tests."""
    return run_module_tests("metrics", collect(globals()))


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
