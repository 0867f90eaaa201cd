"""
Activity metrics module for the activity-shift toolkit.

This module characterizes each user by how much of their output replicates
other accounts (rho) and how spread their retweet sources are (h), compares
classes through KL divergence of binned distributions, and compares periods
through bootstrapped medians.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import rel_entr
from scipy.stats import entropy

from ..exceptions import DegenerateInputError, InsufficientDataError, ValidationError
from .timeline import Timeline, UserClass

logger = logging.getLogger(__name__)

METRICS = ("rho", "h")


@dataclass(frozen=True)
class UserActivityPoint:
    """
    Production-vs-amplification profile of one user.

    `h` is None when the user has fewer than two retweets.
    """

    user_id: str
    user_class: UserClass
    total: int
    retweets: int
    rho: float
    h: Optional[float]

    def value(self, metric: str) -> Optional[float]:
        if metric not in METRICS:
            raise ValidationError(f"Unknown metric '{metric}', expected one of {METRICS}")
        return self.rho if metric == "rho" else self.h


@dataclass(frozen=True, eq=False)
class Histogram:
    """Smoothed probability histogram on a closed support."""

    support: Tuple[float, float]
    bin_edges: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        if not np.all(np.diff(self.bin_edges) > 0):
            raise ValidationError("Histogram bin edges must be strictly increasing")
        if self.probabilities.size != self.bin_edges.size - 1:
            raise ValidationError("Histogram needs one probability per bin")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-12:
            raise ValidationError("Histogram probabilities must sum to 1")


def replicated_fraction(timeline: Timeline) -> float:
    """
    Fraction of a user's messages that are retweets.

    Raises:
        DegenerateInputError: If the timeline is empty
    """
    if not timeline.events:
        raise DegenerateInputError(f"Timeline of {timeline.user_id} is empty")
    return len(timeline.retweets) / len(timeline.events)


def source_entropy(timeline: Timeline) -> Optional[float]:
    """
    Normalized entropy of retweet sources.

    The Shannon entropy of the source distribution is divided by ln R, the
    entropy of retweeting every source once. Undefined (None) for R < 2.
    """
    sources = Counter(e.source_id for e in timeline.retweets)
    retweets = sum(sources.values())
    if retweets < 2:
        return None
    h = float(entropy(list(sources.values()))) / math.log(retweets)
    return min(max(h, 0.0), 1.0)


def activity_point(timeline: Timeline) -> UserActivityPoint:
    """
    Bundle M, R, rho and h for one timeline.

    Raises:
        DegenerateInputError: If the timeline is empty
    """
    rho = replicated_fraction(timeline)
    return UserActivityPoint(
        user_id=timeline.user_id,
        user_class=timeline.user_class,
        total=len(timeline.events),
        retweets=len(timeline.retweets),
        rho=rho,
        h=source_entropy(timeline),
    )


def build_histogram(values: Sequence[float],
                    bins: int = 25,
                    support: Tuple[float, float] = (0.0, 1.0),
                    epsilon: float = 1e-9) -> Histogram:
    """
    Equal-width histogram with additive smoothing.

    Args:
        values: Sample values, all inside the support
        bins: Number of bins (at least 2)
        support: Closed interval covered by the bins
        epsilon: Mass added to every bin before renormalizing

    Returns:
        Histogram whose probabilities are all strictly positive

    Raises:
        ValidationError: On bad arguments or values outside the support
    """
    if bins < 2:
        raise ValidationError(f"Histogram needs at least 2 bins, got {bins}")
    if epsilon <= 0:
        raise ValidationError(f"Smoothing epsilon must be positive, got {epsilon}")
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValidationError("Cannot build a histogram from no values")
    low, high = support
    if np.any(data < low) or np.any(data > high):
        raise ValidationError(f"Values fall outside the support [{low}, {high}]")
    edges = np.linspace(low, high, bins + 1)
    counts, _ = np.histogram(data, bins=edges)
    frequencies = counts / data.size + epsilon
    return Histogram((low, high), edges, frequencies / frequencies.sum())


def kl_divergence(p: Histogram, q: Histogram) -> float:
    """
    Kullback-Leibler divergence D(P || Q) in nats.

    Raises:
        ValidationError: If the histograms do not share bin edges
    """
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(p.bin_edges, q.bin_edges):
        raise ValidationError("KL divergence needs histograms on identical bins")
    # rel_entr gives 0 for p == 0 terms
    return float(max(rel_entr(p.probabilities, q.probabilities).sum(), 0.0))


def class_divergence_matrix(points_by_class: Mapping[UserClass, Sequence[UserActivityPoint]],
                            metric: str = "rho",
                            bins: int = 25,
                            epsilon: float = 1e-9) -> Tuple[List[UserClass], np.ndarray]:
    """
    Pairwise KL divergence between the classes' metric distributions.

    Entry (i, j) is D(class_i || class_j); classes are ordered by name.

    Returns:
        (ordered class list, square matrix)

    Raises:
        ValidationError: With fewer than two classes
        InsufficientDataError: If a class has fewer than two defined values
    """
    if len(points_by_class) < 2:
        raise ValidationError("Divergence matrix needs at least two classes")
    classes = sorted(points_by_class, key=lambda c: UserClass(c).value)
    histograms = []
    for user_class in classes:
        values = [v for v in (p.value(metric) for p in points_by_class[user_class]) if v is not None]
        if len(values) < 2:
            raise InsufficientDataError(UserClass(user_class).value, len(values), 2)
        histograms.append(build_histogram(values, bins=bins, epsilon=epsilon))
    matrix = np.zeros((len(classes), len(classes)))
    for i, p in enumerate(histograms):
        for j, q in enumerate(histograms):
            if i != j:
                matrix[i, j] = kl_divergence(p, q)
    return classes, matrix


def bootstrap_median_ci(values: Sequence[float],
                        resamples: int = 1000,
                        level: float = 0.95,
                        seed: Optional[int] = None) -> Tuple[float, float, float]:
    """
    Median with a percentile bootstrap confidence interval.

    Args:
        values: Sample
        resamples: Number of bootstrap resamples
        level: Confidence level
        seed: Seed of the resampling stream

    Returns:
        (median, ci_low, ci_high)
    """
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValidationError("Cannot bootstrap an empty sample")
    if resamples < 1:
        raise ValidationError(f"Need at least one resample, got {resamples}")
    rng = np.random.default_rng(seed)
    medians = np.empty(resamples)
    # bounded memory for large samples
    block = max(1, min(resamples, 2_000_000 // data.size))
    for start in range(0, resamples, block):
        size = min(block, resamples - start)
        medians[start:start + size] = np.median(data[rng.integers(0, data.size, size=(size, data.size))], axis=1)
    alpha = 1.0 - level
    low, high = np.percentile(medians, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    median = float(np.median(data))
    return median, float(min(low, median)), float(max(high, median))


def box_summary(values: Sequence[float],
                resamples: int = 1000,
                level: float = 0.95,
                seed: Optional[int] = None) -> Dict[str, float]:
    """Median, its bootstrap CI, 5th/95th percentile whiskers and sample size."""
    median, low, high = bootstrap_median_ci(values, resamples, level, seed)
    p05, p95 = np.percentile(np.asarray(values, dtype=float), [5, 95])
    return {
        "median": median,
        "ci_low": low,
        "ci_high": high,
        "p05": float(p05),
        "p95": float(p95),
        "n": len(values),
    }


class ActivityMetrics:
    """
    Activity metrics module.

    Binds the histogram and bootstrap settings of a RunConfig.
    """

    def __init__(self, analyzer):
        """
        Initialize the ActivityMetrics module.

        Args:
            analyzer: ActivityAnalyzer instance
        """
        self.analyzer = analyzer
        self.analyzer.metrics = self

    def points(self, timelines: Sequence[Timeline]) -> List[UserActivityPoint]:
        """Activity points of every non-empty timeline."""
        return [activity_point(t) for t in timelines if t.events]

    def divergence(self, points: Sequence[UserActivityPoint], metric: str) -> Tuple[List[UserClass], np.ndarray]:
        """KL divergence matrix between the classes present in `points`."""
        config = self.analyzer.config
        grouped: Dict[UserClass, List[UserActivityPoint]] = {}
        for point in points:
            grouped.setdefault(point.user_class, []).append(point)
        return class_divergence_matrix(grouped, metric=metric, bins=config.bins, epsilon=config.epsilon)

    def box(self, values: Sequence[float], seed: Optional[int] = None) -> Dict[str, float]:
        config = self.analyzer.config
        return box_summary(values, config.bootstrap_resamples, config.bootstrap_level,
                           config.seed if seed is None else seed)
