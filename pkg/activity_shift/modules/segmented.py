"""
Segmented regression module for the activity-shift toolkit.

This module fits piecewise-constant daily rates by exhaustive dynamic
programming over breakpoint placements, chooses the number of breakpoints
by BIC, turns breakpoints into relative jumps and aggregates jumps over a
population into daily positive/negative series.
"""

import logging
import math
from dataclasses import dataclass
from datetime import date
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DegenerateInputError, ValidationError, WindowTooShortError
from .timeline import AnalysisWindow, DailySeries, total_and_mean_rate

logger = logging.getLogger(__name__)

RSS_FLOOR = 1e-9
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SegmentedFit:
    """Optimal piecewise-constant fit with `k` breakpoints."""

    window: AnalysisWindow
    breakpoints: Tuple[int, ...]
    rates: Tuple[float, ...]
    rss: float
    bic: float

    def __post_init__(self):
        if len(self.rates) != len(self.breakpoints) + 1:
            raise ValidationError("A fit needs one more rate than breakpoints")
        if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValidationError("Breakpoints must be strictly increasing")
        if self.rss < 0:
            raise ValidationError("RSS must be non-negative")

    @property
    def k(self) -> int:
        return len(self.breakpoints)

    @property
    def breakpoint_days(self) -> List[date]:
        return [self.window.day(b) for b in self.breakpoints]


@dataclass(frozen=True)
class Jump:
    """Signed relative rate change of one user on one day."""

    user_id: str
    day: date
    magnitude: float

    def __post_init__(self):
        if not math.isfinite(self.magnitude):
            raise ValidationError(f"Jump magnitude of {self.user_id} on {self.day} is not finite")


@dataclass(frozen=True, eq=False)
class JumpSeries:
    """Daily sums of positive (j_plus) and negative (j_minus) jumps."""

    window: AnalysisWindow
    j_plus: np.ndarray
    j_minus: np.ndarray

    def __post_init__(self):
        for name in ("j_plus", "j_minus"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.shape != (self.window.n_days,):
                raise ValidationError(f"{name} must have one value per window day")
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if np.any(self.j_plus < 0) or np.any(self.j_minus > 0):
            raise ValidationError("j_plus must be >= 0 and j_minus <= 0")


def segment_cost_matrix(counts: np.ndarray, min_len: int) -> np.ndarray:
    """
    RSS of every admissible segment [i, j) around its own mean.

    Entries for segments shorter than `min_len` are +inf.
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    cs = np.concatenate(([0.0], np.cumsum(counts)))
    cs2 = np.concatenate(([0.0], np.cumsum(counts * counts)))
    length = np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]
    admissible = length >= min_len
    total = cs[None, :] - cs[:, None]
    squares = cs2[None, :] - cs2[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = squares - total * total / length
    cost = np.where(admissible, np.maximum(cost, 0.0), np.inf)
    return cost


def optimal_partition(cost: np.ndarray, n_breaks: int, min_len: int) -> Tuple[float, Tuple[int, ...]]:
    """
    Minimum total cost split of [0, n) into n_breaks + 1 segments.

    `cost[i, j]` is the cost of segment [i, j). Among placements within
    the tie tolerance of the optimum, the lexicographically smallest
    breakpoint tuple is returned.

    Raises:
        WindowTooShortError: If no admissible placement exists
    """
    n = cost.shape[0] - 1
    if n < (n_breaks + 1) * min_len:
        raise WindowTooShortError(
            f"{n} days cannot hold {n_breaks + 1} segments of at least {min_len} days"
        )
    # suffix[r][i]: best cost of [i, n) with r breakpoints
    suffix = [cost[:, n].copy()]
    for _ in range(n_breaks):
        suffix.append((cost + suffix[-1][None, :]).min(axis=1))
    best = float(suffix[n_breaks][0])
    if not math.isfinite(best):
        raise WindowTooShortError(f"No admissible placement of {n_breaks} breakpoints")
    breakpoints = []
    position = 0
    for r in range(n_breaks, 0, -1):
        target = suffix[r][position]
        candidates = cost[position, :] + suffix[r - 1]
        tolerance = TIE_TOLERANCE * max(1.0, abs(target))
        position = int(np.flatnonzero(candidates <= target + tolerance)[0])
        breakpoints.append(position)
    return best, tuple(breakpoints)


def segment_rates(counts: np.ndarray, breakpoints: Sequence[int]) -> Tuple[float, ...]:
    """Mean daily count of each segment."""
    edges = [0, *breakpoints, len(counts)]
    return tuple(float(np.mean(counts[a:b])) for a, b in zip(edges, edges[1:]))


def bic_score(rss: float, n: int, k: int) -> float:
    """Gaussian-residual BIC with 2k+1 parameters and floored RSS."""
    return n * math.log(max(rss, RSS_FLOOR) / n) + (2 * k + 1) * math.log(n)


def fit_segments(series: DailySeries, k: int, min_segment_len: int = 7,
                 cost: Optional[np.ndarray] = None) -> SegmentedFit:
    """
    Globally RSS-optimal piecewise-constant fit with exactly k breakpoints.

    Args:
        series: Daily counts
        k: Number of breakpoints
        min_segment_len: Minimum segment length in days
        cost: Precomputed segment cost matrix (reused across k)

    Returns:
        SegmentedFit

    Raises:
        WindowTooShortError: If the window cannot hold k+1 segments
    """
    if k < 0:
        raise ValidationError(f"Breakpoint count must be >= 0, got {k}")
    if min_segment_len < 1:
        raise ValidationError(f"Minimum segment length must be >= 1, got {min_segment_len}")
    if series.n < (k + 1) * min_segment_len:
        raise WindowTooShortError(
            f"{series.n} days cannot hold {k + 1} segments of at least {min_segment_len} days"
        )
    if cost is None:
        cost = segment_cost_matrix(series.counts, min_segment_len)
    rss, breakpoints = optimal_partition(cost, k, min_segment_len)
    return SegmentedFit(
        window=series.window,
        breakpoints=breakpoints,
        rates=segment_rates(series.counts, breakpoints),
        rss=rss,
        bic=bic_score(rss, series.n, k),
    )


def select_fit(series: DailySeries, k_max: int = 5, min_segment_len: int = 7) -> SegmentedFit:
    """
    Fit k = 0..k_max breakpoints and keep the lowest-BIC fit.

    Breakpoint counts the window cannot hold are skipped; ties go to the
    smaller k.
    """
    if k_max < 0:
        raise ValidationError(f"k_max must be >= 0, got {k_max}")
    feasible = min(k_max, series.n // min_segment_len - 1)
    if feasible < 0:
        raise WindowTooShortError(
            f"{series.n} days are shorter than the minimum segment of {min_segment_len} days"
        )
    if feasible < k_max:
        logger.debug(f"Window of {series.n} days holds at most {feasible} breakpoints")
    cost = segment_cost_matrix(series.counts, min_segment_len)
    best = None
    for k in range(feasible + 1):
        fit = fit_segments(series, k, min_segment_len, cost=cost)
        if best is None or fit.bic < best.bic:
            best = fit
    return best


def relative_jumps(fit: SegmentedFit, m: float, user_id: str) -> List[Jump]:
    """
    Relative jump at every breakpoint: (rate after - rate before) / m.

    Raises:
        DegenerateInputError: If m <= 0
    """
    if m <= 0:
        raise DegenerateInputError(f"Mean rate of {user_id} must be positive, got {m}")
    return [
        Jump(user_id, fit.window.day(b), (after - before) / m)
        for b, before, after in zip(fit.breakpoints, fit.rates, fit.rates[1:])
    ]


def aggregate_jumps(jumps: Iterable[Jump], window: AnalysisWindow) -> JumpSeries:
    """
    Sum positive and negative jump magnitudes per day over all users.

    Raises:
        ValidationError: If a jump falls outside the window
    """
    j_plus = np.zeros(window.n_days)
    j_minus = np.zeros(window.n_days)
    for jump in sorted(jumps, key=lambda j: (j.day, j.user_id)):
        if not window.contains(jump.day):
            raise ValidationError(f"Jump of {jump.user_id} on {jump.day} is outside the window")
        index = window.index_of(jump.day)
        if jump.magnitude > 0:
            j_plus[index] += jump.magnitude
        elif jump.magnitude < 0:
            j_minus[index] += jump.magnitude
    return JumpSeries(window, j_plus, j_minus)


def jump_ratio(series: JumpSeries) -> List[Optional[float]]:
    """Per-day |j_minus| / j_plus; None on days without positive jumps."""
    return [
        abs(float(minus)) / float(plus) if plus > 0 else None
        for plus, minus in zip(series.j_plus, series.j_minus)
    ]


def breakpoint_count_histogram(fits: Sequence[SegmentedFit], k_max: Optional[int] = None) -> Dict[int, float]:
    """Fraction of fits with each breakpoint count 0..k_max."""
    if not fits:
        return {}
    counts = np.bincount([f.k for f in fits], minlength=(k_max if k_max is not None else 0) + 1)
    return {k: float(c) / len(fits) for k, c in enumerate(counts)}


class SegmentedRegression:
    """
    Segmented regression module.

    Binds k_max and min_segment_len of a RunConfig.
    """

    def __init__(self, analyzer):
        """
        Initialize the SegmentedRegression module.

        Args:
            analyzer: ActivityAnalyzer instance
        """
        self.analyzer = analyzer
        self.analyzer.ssr = self

    def select_fit(self, series: DailySeries) -> SegmentedFit:
        config = self.analyzer.config
        return select_fit(series, k_max=config.k_max, min_segment_len=config.min_segment_len)

    def jumps(self, series: DailySeries, user_id: str) -> Tuple[SegmentedFit, List[Jump]]:
        """Selected fit and its relative jumps for one user's series."""
        fit = self.select_fit(series)
        _, m = total_and_mean_rate(series)
        return fit, relative_jumps(fit, m, user_id)
