"""
Timeline module for the activity-shift toolkit.

This module holds the canonical data model for per-user event streams
(events, timelines, analysis windows, daily count series) and the
windowing and binning operations every analysis consumes.
"""

import logging
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DegenerateInputError, ValidationError

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    """Kind of a posted message."""

    ORIGINAL = "original"
    RETWEET = "retweet"


class UserClass(str, Enum):
    """Closed set of user classes; GENERIC marks external data of unknown class."""

    JOURNALIST = "journalist"
    POLITICIAN = "politician"
    RANDOM_FOLLOWER = "random_follower"
    RANDOM_FRIEND = "random_friend"
    GENERIC = "generic"


def as_utc(timestamp: datetime) -> datetime:
    """Return the timestamp as an aware UTC datetime truncated to the second."""
    if timestamp.tzinfo is None:
        timestamp = timestamp.replace(tzinfo=timezone.utc)
    return timestamp.astimezone(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class Event:
    """
    A single message in a timeline.

    `source_id` names the amplified account and is set exactly when the
    event is a retweet.
    """

    timestamp: datetime
    kind: EventKind = EventKind.ORIGINAL
    source_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "timestamp", as_utc(self.timestamp))
        object.__setattr__(self, "kind", EventKind(self.kind))
        if (self.kind is EventKind.RETWEET) != (self.source_id is not None):
            raise ValidationError(
                "source_id must be set exactly when kind is retweet",
                detail={"kind": self.kind.value, "source_id": self.source_id},
            )

    @property
    def is_retweet(self) -> bool:
        return self.kind is EventKind.RETWEET


@dataclass(frozen=True)
class Timeline:
    """One user's time-ordered events."""

    user_id: str
    user_class: UserClass = UserClass.GENERIC
    events: Tuple[Event, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.user_id:
            raise ValidationError("user_id must be non-empty")
        object.__setattr__(self, "user_class", UserClass(self.user_class))
        events = tuple(self.events)
        for earlier, later in zip(events, events[1:]):
            if later.timestamp < earlier.timestamp:
                raise ValidationError(
                    f"Events of user {self.user_id} are not sorted by timestamp",
                    detail={"at": later.timestamp.isoformat()},
                )
        object.__setattr__(self, "events", events)

    @classmethod
    def from_unsorted(cls, user_id: str, user_class: UserClass, events: Iterable[Event]) -> "Timeline":
        """Build a timeline, sorting events by timestamp (stable for equal timestamps)."""
        return cls(user_id, user_class, tuple(sorted(events, key=lambda e: e.timestamp)))

    def __len__(self) -> int:
        return len(self.events)

    @property
    def retweets(self) -> List[Event]:
        return [e for e in self.events if e.is_retweet]


@dataclass(frozen=True)
class AnalysisWindow:
    """Half-open range of calendar days [start_date, end_date)."""

    start_date: date
    end_date: date

    def __post_init__(self):
        if not self.start_date < self.end_date:
            raise ValidationError(
                f"Window start {self.start_date} must precede end {self.end_date}"
            )

    @property
    def n_days(self) -> int:
        return (self.end_date - self.start_date).days

    def day(self, index: int) -> date:
        """Calendar date of the day at `index`."""
        return self.start_date + timedelta(days=index)

    def index_of(self, day: date) -> int:
        """Day index of a calendar date (may fall outside 0..n_days-1)."""
        return (day - self.start_date).days

    def contains(self, day: date) -> bool:
        return self.start_date <= day < self.end_date

    def dates(self) -> List[date]:
        return [self.day(i) for i in range(self.n_days)]


@dataclass(frozen=True, eq=False)
class DailySeries:
    """Per-day event counts over an analysis window."""

    window: AnalysisWindow
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.shape[0] != self.window.n_days:
            raise ValidationError(
                f"Series has {counts.size} counts for a {self.window.n_days}-day window"
            )
        if np.any(counts < 0):
            raise ValidationError("Daily counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.shape[0])

    def scaled(self, factor: int) -> "DailySeries":
        return replace(self, counts=self.counts * factor)

    def reversed(self) -> "DailySeries":
        return replace(self, counts=self.counts[::-1])


def day_start(day: date) -> datetime:
    """00:00:00 UTC of a calendar date."""
    return datetime.combine(day, time(0, 0), tzinfo=timezone.utc)


def bin_daily(timeline: Timeline, window: AnalysisWindow) -> DailySeries:
    """
    Count events per UTC calendar day of the window.

    Events outside the window are ignored; an event at exactly midnight
    belongs to the day that starts at that instant.

    Args:
        timeline: Timeline to bin
        window: Analysis window

    Returns:
        DailySeries with one count per window day
    """
    if not timeline.events:
        return DailySeries(window, np.zeros(window.n_days, dtype=np.int64))
    base = window.start_date.toordinal()
    offsets = np.fromiter(
        (e.timestamp.date().toordinal() - base for e in timeline.events),
        dtype=np.int64,
        count=len(timeline.events),
    )
    inside = offsets[(offsets >= 0) & (offsets < window.n_days)]
    counts = np.bincount(inside, minlength=window.n_days)
    logger.debug(f"Binned {inside.size}/{offsets.size} events of {timeline.user_id} into {window.n_days} days")
    return DailySeries(window, counts)


def split_at(timeline: Timeline, day: date) -> Tuple[Timeline, Timeline]:
    """
    Split a timeline at 00:00 UTC of `day`.

    Returns:
        (events strictly before the instant, events at or after it)
    """
    cut = day_start(day)
    before = tuple(e for e in timeline.events if e.timestamp < cut)
    after = tuple(e for e in timeline.events if e.timestamp >= cut)
    return replace(timeline, events=before), replace(timeline, events=after)


def restrict(timeline: Timeline, window: AnalysisWindow) -> Timeline:
    """Keep only the events that fall inside the window."""
    start, end = day_start(window.start_date), day_start(window.end_date)
    return replace(timeline, events=tuple(e for e in timeline.events if start <= e.timestamp < end))


def total_and_mean_rate(series: DailySeries) -> Tuple[int, float]:
    """
    Total count M and mean daily rate m = M / n.

    Raises:
        DegenerateInputError: If the series has no days
    """
    if series.n == 0:
        raise DegenerateInputError("Cannot compute the mean rate of an empty window")
    total = int(series.counts.sum())
    return total, total / series.n


def weekly_activity(timelines: Sequence[Timeline], window: AnalysisWindow) -> List[Tuple[date, float]]:
    """
    Mean events per day per user, for each week of the window.

    Weeks start on the window start date; a trailing partial week is
    averaged over the days it actually covers.

    Args:
        timelines: Population of timelines
        window: Analysis window

    Returns:
        List of (week start date, mean events per user-day)
    """
    if not timelines:
        return []
    total = np.zeros(window.n_days, dtype=np.int64)
    for timeline in timelines:
        total += bin_daily(timeline, window).counts
    weeks = []
    for start in range(0, window.n_days, 7):
        chunk = total[start:start + 7]
        weeks.append((window.day(start), float(chunk.sum()) / (chunk.size * len(timelines))))
    return weeks
