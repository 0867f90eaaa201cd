"""
Sampling module for the activity-shift toolkit.

This module implements the user-sampling procedures against a SourceClient:
random followers and friends of active located accounts, and journalists
among the accounts followed by media outlets.
"""

import logging
import time
from dataclasses import replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..client import TIMELINE_CAP, SourceClient, check_cap
from ..exceptions import RateLimitError, ResourceNotFoundError, SamplingAbortedError, ServerError
from .timeline import Timeline, UserClass

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_THRESHOLDS = (55, 95, 1000)

DEFAULT_MEDIA_HANDLES = (
    "el_pais", "JotDownSpain", "eldiarioes", "elespanolcom", "revistamongolia",
    "la_ser", "_infoLibre", "EFEnoticias", "elmundoes", "elconfidencial",
    "indpcom", "ctxt_es", "publico_es", "ondacero_es", "cuatro",
    "LaVanguardia", "europapress", "laSextaTV", "rtve",
)

DEFAULT_BIO_STEMS = (
    "journalist", "periodista", "periodismo", "reporter", "reportera",
    "redactor", "redactora", "corresponsal", "kazetari", "xornalista",
)


class Retrying:
    """
    Call wrapper retrying rate-limit and server errors with exponential backoff.

    Args:
        max_retries: Retries after the first attempt
        base_delay: Delay before the first retry, doubled on each further retry
        sleep: Sleep function
    """

    def __init__(self, max_retries: int = 3, base_delay: float = 1.0, sleep: Callable[[float], None] = time.sleep):
        self.max_retries = max_retries
        self.base_delay = base_delay
        self.sleep = sleep

    def __call__(self, function: Callable[..., T], *args) -> T:
        for attempt in range(self.max_retries + 1):
            try:
                return function(*args)
            except (RateLimitError, ServerError) as e:
                if attempt == self.max_retries:
                    raise
                delay = self.base_delay * 2 ** attempt
                logger.warning(f"{function.__name__} failed ({e}), retrying in {delay:.1f}s")
                self.sleep(delay)


def qualifies(profile, thresholds: Tuple[int, int, int] = DEFAULT_THRESHOLDS) -> bool:
    """True when followers, friends and statuses are all strictly above their thresholds."""
    followers, friends, statuses = thresholds
    return profile.followers > followers and profile.friends > friends and profile.statuses > statuses


def sample_random_users(client: SourceClient,
                        thresholds: Tuple[int, int, int] = DEFAULT_THRESHOLDS,
                        target: int = 100,
                        seed: Optional[int] = None,
                        query: str = "",
                        page_size: int = 200,
                        max_rounds: int = 100,
                        retry: Optional[Retrying] = None) -> Tuple[List[str], List[str]]:
    """
    Sample random followers and random friends of active located accounts.

    Recent located posts are pulled repeatedly; every author above all
    three thresholds contributes one uniformly chosen follower and one
    uniformly chosen friend, until both sets reach `target`.

    Args:
        client: Source client
        thresholds: (followers, friends, statuses) lower bounds, strict
        target: Size of each set
        seed: Seed of the uniform choices
        query: Location query
        page_size: Followers/friends fetched per author
        max_rounds: Searches before giving up on reaching the target
        retry: Retry policy (default: 3 retries, 1 s base delay)

    Returns:
        (random follower ids, random friend ids), in discovery order

    Raises:
        SamplingAbortedError: If the client keeps failing; `progress` holds both partial sets
    """
    retry = retry or Retrying()
    rng = np.random.default_rng(seed)
    followers: List[str] = []
    friends: List[str] = []
    seen_authors = set()

    def pick(ids: Sequence[str], chosen: List[str]) -> None:
        candidates = list(ids)
        if candidates and len(chosen) < target:
            choice = candidates[int(rng.integers(len(candidates)))]
            if choice not in chosen:
                chosen.append(choice)

    try:
        for _ in range(max_rounds):
            if len(followers) >= target and len(friends) >= target:
                break
            authors = retry(client.recent_tweets_by_location, query)
            fresh = [a for a in authors if a.user_id not in seen_authors]
            if not fresh:
                break
            for author in fresh:
                seen_authors.add(author.user_id)
                if not qualifies(author, thresholds):
                    continue
                try:
                    pick(retry(client.followers_of, author.user_id, page_size), followers)
                    pick(retry(client.friends_of, author.user_id, page_size), friends)
                except ResourceNotFoundError:
                    logger.debug(f"Author {author.user_id} disappeared, skipping")
                if len(followers) >= target and len(friends) >= target:
                    break
    except (RateLimitError, ServerError) as e:
        logger.error(f"Random-user sampling aborted: {e}")
        raise SamplingAbortedError(
            f"Random-user sampling aborted after retries: {e}",
            progress={"random_followers": followers, "random_friends": friends},
        )
    if len(followers) < target or len(friends) < target:
        logger.warning(f"Source exhausted: {len(followers)} followers, {len(friends)} friends of {target}")
    logger.info(f"Sampled {len(followers)} random followers and {len(friends)} random friends")
    return followers, friends


def sample_journalists(client: SourceClient,
                       media_handles: Iterable[str] = DEFAULT_MEDIA_HANDLES,
                       bio_keywords: Iterable[str] = DEFAULT_BIO_STEMS,
                       page_size: int = 5000,
                       retry: Optional[Retrying] = None) -> List[str]:
    """
    Accounts followed by media outlets whose bio mentions a journalist keyword.

    Matching is case-insensitive substring matching on the bio; every
    account is checked once even when several outlets follow it.

    Raises:
        SamplingAbortedError: If the client keeps failing; `progress` holds the ids found so far
    """
    retry = retry or Retrying()
    stems = [k.lower() for k in bio_keywords]
    seen = set()
    journalists: List[str] = []
    try:
        for handle in media_handles:
            for user_id in retry(client.friends_of, handle, page_size):
                if user_id in seen:
                    continue
                seen.add(user_id)
                try:
                    bio = retry(client.profile_bio, user_id).lower()
                except ResourceNotFoundError:
                    continue
                if any(stem in bio for stem in stems):
                    journalists.append(user_id)
    except (RateLimitError, ServerError) as e:
        logger.error(f"Journalist sampling aborted: {e}")
        raise SamplingAbortedError(f"Journalist sampling aborted after retries: {e}", progress=journalists)
    logger.info(f"Found {len(journalists)} journalists among {len(seen)} accounts")
    return journalists


def fetch_timelines(client: SourceClient,
                    user_ids: Iterable[str],
                    user_class: UserClass,
                    cap: int = TIMELINE_CAP,
                    retry: Optional[Retrying] = None) -> List[Timeline]:
    """Retrieve the timelines of sampled users and tag them with their class."""
    check_cap(cap)
    retry = retry or Retrying()
    timelines = []
    for user_id in user_ids:
        try:
            timeline = retry(client.user_timeline, user_id, cap)
        except ResourceNotFoundError:
            logger.warning(f"Timeline of {user_id} not found, skipping")
            continue
        timelines.append(replace(timeline, user_class=UserClass(user_class)))
    return timelines
