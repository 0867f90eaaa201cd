"""
Line-delimited timeline records.

Each line holds one user:
    {"user_id": "...", "class": "journalist", "tweets": [{"ts": "2020-03-10T08:00:00Z", "rt": false, "src": null}]}
"""

import io
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Any, Dict, Iterable, List, Optional, Union

from ..exceptions import ActivityShiftError, ValidationError
from .timeline import Event, EventKind, Timeline, UserClass

logger = logging.getLogger(__name__)


@dataclass
class IngestResult:
    """Parsed timelines plus the per-line errors of rejected records."""

    timelines: List[Timeline] = field(default_factory=list)
    errors: List[ValidationError] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return len(self.errors)


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; a trailing Z and naive values mean UTC."""
    if not isinstance(value, str):
        raise ValidationError(f"Timestamp must be a string, got {value!r}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"Bad ISO-8601 timestamp '{value}'")


def parse_record(record: Dict[str, Any], line: Optional[int] = None) -> Timeline:
    """
    Convert one decoded record to a Timeline.

    Raises:
        ValidationError: If the record breaks the wire format or a Timeline invariant
    """
    if not isinstance(record, dict):
        raise ValidationError("Record must be a JSON object", line=line)
    missing = [key for key in ("user_id", "class", "tweets") if key not in record]
    if missing:
        raise ValidationError(f"Record is missing {missing}", line=line)
    try:
        user_class = UserClass(record["class"])
    except ValueError:
        raise ValidationError(f"Unknown class '{record['class']}'", line=line)
    if not isinstance(record["tweets"], list):
        raise ValidationError("tweets must be a list", line=line)
    events = []
    for position, tweet in enumerate(record["tweets"]):
        try:
            if not isinstance(tweet, dict):
                raise ValidationError("tweet must be an object")
            retweet = tweet.get("rt", False)
            if not isinstance(retweet, bool):
                raise ValidationError(f"rt must be a boolean, got {retweet!r}")
            source = tweet.get("src")
            if source is not None and not isinstance(source, str):
                source = str(source)
            events.append(Event(parse_timestamp(tweet.get("ts")),
                                EventKind.RETWEET if retweet else EventKind.ORIGINAL,
                                source))
        except ValidationError as e:
            raise ValidationError(f"tweet {position}: {e.message}", detail=e.detail, line=line)
    try:
        return Timeline.from_unsorted(str(record["user_id"]), user_class, events)
    except ValidationError as e:
        raise ValidationError(e.message, detail=e.detail, line=line)


def timeline_to_record(timeline: Timeline) -> Dict[str, Any]:
    """Wire-format record of a timeline."""
    return {
        "user_id": timeline.user_id,
        "class": timeline.user_class.value,
        "tweets": [
            {
                "ts": e.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "rt": e.is_retweet,
                "src": e.source_id,
            }
            for e in timeline.events
        ],
    }


def read_records(stream: IO[str]) -> IngestResult:
    """Parse every line of a stream, collecting per-line errors."""
    result = IngestResult()
    seen = set()
    for number, text in enumerate(stream, start=1):
        if not text.strip():
            continue
        try:
            try:
                record = json.loads(text)
            except json.JSONDecodeError as e:
                raise ValidationError(f"Malformed JSON: {e.msg}", line=number)
            timeline = parse_record(record, line=number)
            if timeline.user_id in seen:
                raise ValidationError(f"Duplicate user_id '{timeline.user_id}'", line=number)
        except ValidationError as e:
            logger.warning(f"Skipping record: {e.message}")
            result.errors.append(e)
            continue
        seen.add(timeline.user_id)
        result.timelines.append(timeline)
    return result


def ingest(source: Union[str, IO[str]]) -> IngestResult:
    """
    Ingest line-delimited timeline records.

    Args:
        source: File path, "-" for standard input, or an open text stream

    Returns:
        IngestResult with the valid timelines and one error per rejected line

    Raises:
        ActivityShiftError: If the input cannot be read
    """
    if not isinstance(source, str):
        result = read_records(source)
    elif source == "-":
        result = read_records(sys.stdin)
    else:
        try:
            with io.open(source, "r", encoding="utf-8") as stream:
                result = read_records(stream)
        except (OSError, UnicodeDecodeError) as e:
            logger.error(f"Cannot read {source}: {e}")
            raise ActivityShiftError(f"Cannot read {source}: {e}")
    logger.info(f"Ingested {len(result.timelines)} timelines, skipped {result.skipped} records")
    return result


def write_records(timelines: Iterable[Timeline], stream: IO[str]) -> int:
    """Write timelines as line-delimited records; returns the number written."""
    written = 0
    for timeline in timelines:
        stream.write(json.dumps(timeline_to_record(timeline), ensure_ascii=False) + "\n")
        written += 1
    return written
