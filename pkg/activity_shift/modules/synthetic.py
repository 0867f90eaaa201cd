"""
Synthetic module for the activity-shift toolkit.

This module generates seeded piecewise-constant-rate Poisson timelines and
populations, optionally with retweets drawn from a Zipf-weighted source
pool, plus the two validation scenarios with rates switching 1 -> 5 -> 2.
"""

import logging
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ValidationError
from .timeline import AnalysisWindow, Event, EventKind, Timeline, UserClass, day_start

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
SCENARIO_WINDOW = AnalysisWindow(date(2018, 10, 1), date(2020, 5, 1))


@dataclass(frozen=True)
class RateSchedule:
    """Piecewise-constant daily rate: each piece holds from its start date to the next piece."""

    window: AnalysisWindow
    pieces: Tuple[Tuple[date, float], ...]

    def __post_init__(self):
        pieces = tuple((start, float(rate)) for start, rate in self.pieces)
        if not pieces or pieces[0][0] != self.window.start_date:
            raise ValidationError("The first piece must start on the window start date")
        for (earlier, _), (later, _) in zip(pieces, pieces[1:]):
            if not earlier < later:
                raise ValidationError("Piece start dates must be strictly increasing")
        for start, rate in pieces:
            if not self.window.contains(start):
                raise ValidationError(f"Piece start {start} is outside the window")
            if not rate >= 0:
                raise ValidationError(f"Rates must be non-negative, got {rate}")
        object.__setattr__(self, "pieces", pieces)

    @property
    def switch_dates(self) -> List[date]:
        return [start for start, _ in self.pieces[1:]]

    def daily_rates(self) -> np.ndarray:
        """Rate of the active piece on every window day."""
        rates = np.empty(self.window.n_days)
        starts = [self.window.index_of(start) for start, _ in self.pieces] + [self.window.n_days]
        for (a, b), (_, rate) in zip(zip(starts, starts[1:]), self.pieces):
            rates[a:b] = rate
        return rates


def parse_schedule(text: str, window: AnalysisWindow) -> RateSchedule:
    """
    Parse a schedule written as comma-separated `start:rate` pieces.

    Example:
        "2018-10-01:1, 2019-01-12:5, 2020-03-02:2"
    """
    pieces = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        try:
            start, rate = item.split(":")
            pieces.append((date.fromisoformat(start.strip()), float(rate)))
        except ValueError:
            raise ValidationError(f"Bad schedule piece '{item}', expected YYYY-MM-DD:rate")
    return RateSchedule(window, tuple(pieces))


def _zipf_weights(pool_size: int, exponent: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, pool_size + 1) ** exponent
    return weights / weights.sum()


def generate(schedule: RateSchedule,
             seed: Union[int, np.random.SeedSequence, None] = None,
             user_id: str = "synthetic",
             user_class: UserClass = UserClass.GENERIC,
             rho_star: float = 0.0,
             rho_after: Optional[float] = None,
             rho_switch: Optional[date] = None,
             source_pool: int = 50,
             zipf_exponent: float = 1.0) -> Timeline:
    """
    Generate one timeline from a rate schedule.

    Each day's count is Poisson with the active rate and the events are
    placed uniformly (to the second) within the UTC day. With rho_star > 0
    each event is a retweet with that probability, switching to rho_after
    from rho_switch on; retweet sources are drawn from a pool with Zipf
    weights.

    Args:
        schedule: Rate schedule
        seed: Seed or SeedSequence of this timeline's stream
        user_id: Id of the generated user
        user_class: Class of the generated user
        rho_star: Retweet probability
        rho_after: Retweet probability from rho_switch on (default rho_star)
        rho_switch: Date on which rho_after takes over
        source_pool: Number of distinct retweet sources
        zipf_exponent: Exponent of the source popularity weights

    Returns:
        Timeline sorted by timestamp
    """
    for name, value in (("rho_star", rho_star), ("rho_after", rho_after)):
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {value}")
    rng = np.random.default_rng(seed)
    window = schedule.window
    counts = rng.poisson(schedule.daily_rates())
    days = np.repeat(np.arange(window.n_days), counts)
    seconds = rng.integers(0, SECONDS_PER_DAY, size=days.size)
    order = np.lexsort((seconds, days))
    days, seconds = days[order], seconds[order]

    probability = np.full(days.size, rho_star)
    if rho_after is not None and rho_switch is not None:
        probability[days >= window.index_of(rho_switch)] = rho_after
    is_retweet = rng.uniform(size=days.size) < probability
    sources = rng.choice(source_pool, size=days.size, p=_zipf_weights(source_pool, zipf_exponent))

    origin = day_start(window.start_date)
    events = [
        Event(origin + timedelta(days=int(d), seconds=int(s)), EventKind.RETWEET, f"src{int(r):04d}")
        if rt else Event(origin + timedelta(days=int(d), seconds=int(s)))
        for d, s, rt, r in zip(days, seconds, is_retweet, sources)
    ]
    return Timeline(user_id, user_class, tuple(events))


def validation_scenarios() -> Dict[str, RateSchedule]:
    """
    The two validation schedules, rates 1 -> 5 -> 2.

    Scenario A switches on 2019-01-12 and 2020-03-02, scenario B on
    2019-10-12 and 2020-03-02; both cover 2018-10-01 to 2020-04-30.
    """
    start = SCENARIO_WINDOW.start_date
    return {
        "A": RateSchedule(SCENARIO_WINDOW, ((start, 1.0), (date(2019, 1, 12), 5.0), (date(2020, 3, 2), 2.0))),
        "B": RateSchedule(SCENARIO_WINDOW, ((start, 1.0), (date(2019, 10, 12), 5.0), (date(2020, 3, 2), 2.0))),
    }


@dataclass(frozen=True)
class PopulationSpec:
    """A group of users sharing a schedule, class and retweet behavior."""

    schedule: RateSchedule
    count: int
    user_class: UserClass = UserClass.GENERIC
    rho_star: float = 0.0
    rho_after: Optional[float] = None
    rho_switch: Optional[date] = None

    def __post_init__(self):
        if self.count < 0:
            raise ValidationError(f"User count must be >= 0, got {self.count}")
        object.__setattr__(self, "user_class", UserClass(self.user_class))


def generate_population(specs: Sequence[Union[PopulationSpec, tuple]], seed: Optional[int] = None) -> List[Timeline]:
    """
    Generate independent timelines for every spec.

    User i of the population draws from its own stream seeded by
    (seed, i), so the population does not depend on generation order.

    Args:
        specs: PopulationSpec or (schedule, count, user_class) tuples
        seed: Population seed

    Returns:
        Timelines with distinct user_ids, in spec order
    """
    root = seed if seed is not None else np.random.SeedSequence().entropy
    timelines = []
    index = 0
    for spec in specs:
        if not isinstance(spec, PopulationSpec):
            spec = PopulationSpec(*spec)
        for _ in range(spec.count):
            timelines.append(generate(
                spec.schedule,
                np.random.SeedSequence([root, index]),
                user_id=f"{spec.user_class.value}_{index:05d}",
                user_class=spec.user_class,
                rho_star=spec.rho_star,
                rho_after=spec.rho_after,
                rho_switch=spec.rho_switch,
            ))
            index += 1
    logger.debug(f"Generated {len(timelines)} synthetic timelines")
    return timelines


class SyntheticGenerator:
    """
    Synthetic module.

    Draws populations with the analyzer's seed.
    """

    def __init__(self, analyzer):
        """
        Initialize the SyntheticGenerator module.

        Args:
            analyzer: ActivityAnalyzer instance
        """
        self.analyzer = analyzer
        self.analyzer.synthetic = self

    def scenarios(self) -> Dict[str, RateSchedule]:
        return validation_scenarios()

    def population(self, specs, seed: Optional[int] = None) -> List[Timeline]:
        return generate_population(specs, self.analyzer.config.seed if seed is None else seed)
