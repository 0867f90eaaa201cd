"""
Source client module for the activity-shift toolkit.

This module defines the abstract interface the sampling procedures query
(recent located posts, followers, friends, bios, timelines) and an HTTP
implementation for a JSON archive service that mirrors collected data.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional
from urllib.parse import urljoin

import requests

from .exceptions import (
    ResourceNotFoundError,
    RateLimitError,
    ServerError,
    SourceAPIError,
    ValidationError,
)
from .modules.records import parse_record
from .modules.timeline import Timeline, UserClass

logger = logging.getLogger(__name__)

TIMELINE_CAP = 3200


@dataclass(frozen=True)
class UserProfile:
    """Public counters of one account; statuses counts every post (the "actions")."""

    user_id: str
    followers: int
    friends: int
    statuses: int
    bio: str = ""

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "UserProfile":
        return cls(
            user_id=str(data["user_id"]),
            followers=int(data.get("followers_count", 0)),
            friends=int(data.get("friends_count", 0)),
            statuses=int(data.get("statuses_count", 0)),
            bio=data.get("description") or "",
        )


def check_cap(cap: int) -> int:
    if not 0 < cap <= TIMELINE_CAP:
        raise ValidationError(f"Timeline cap must be in 1..{TIMELINE_CAP}, got {cap}")
    return cap


class SourceClient(ABC):
    """
    Source of accounts and timelines for the sampling procedures.
    """

    @abstractmethod
    def recent_tweets_by_location(self, query: str) -> List[UserProfile]:
        """Authors of recent posts matching a location query, with their counters."""

    @abstractmethod
    def followers_of(self, user_id: str, k: int) -> List[str]:
        """Up to k follower ids of a user."""

    @abstractmethod
    def friends_of(self, user_id: str, k: int) -> List[str]:
        """Up to k ids the user follows."""

    @abstractmethod
    def profile_bio(self, user_id: str) -> str:
        """Free-text profile description."""

    @abstractmethod
    def user_timeline(self, user_id: str, cap: int = TIMELINE_CAP) -> Timeline:
        """Most recent posts of a user, at most `cap` (never more than 3200)."""

    def user_profile(self, user_id: str) -> UserProfile:
        raise NotImplementedError


class HttpSourceClient(SourceClient):
    """
    SourceClient backed by a JSON-over-HTTP archive service.

    Provides methods for making requests to the service and mapping error
    responses onto the source exception hierarchy.
    """

    def __init__(self, base_url: str, api_token: Optional[str] = None, timeout: float = 30):
        """
        Initialize the HttpSourceClient.

        Args:
            base_url: Root URL of the archive service
            api_token: Bearer token, if the service requires one
            timeout: Request timeout in seconds

        Raises:
            ValueError: If base_url is empty
        """
        if not base_url:
            raise ValueError("base_url must be provided")
        self.base_url = base_url.rstrip("/") + "/"
        self.api_token = api_token
        self.timeout = timeout

    def request(self, method: str, path: str, params: Optional[Dict[str, Any]] = None) -> Any:
        """
        Make a request to the archive service.

        Args:
            method: HTTP method
            path: Endpoint path
            params: Query parameters

        Returns:
            Decoded JSON response

        Raises:
            SourceAPIError: If the service returns an error or is unreachable
        """
        url = urljoin(self.base_url, path.lstrip("/"))
        logger.debug(f"Making {method} request to {url}")
        headers = {"Accept": "application/json"}
        if self.api_token:
            headers["Authorization"] = f"Bearer {self.api_token}"
        try:
            response = requests.request(
                method=method.upper(),
                url=url,
                params=params,
                headers=headers,
                timeout=self.timeout,
            )
            logger.debug(f"Response status: {response.status_code}")
            if 200 <= response.status_code < 300:
                return response.json() if response.content else None
            logger.error(f"Request failed with status code {response.status_code}: {response.text}")
            self._handle_error_response(response)
        except requests.RequestException as e:
            logger.exception(f"Request failed: {str(e)}")
            raise SourceAPIError(message=f"Request failed: {str(e)}")
        except ValueError as e:
            raise SourceAPIError(message=f"Response is not valid JSON: {e}")

    def _handle_error_response(self, response: requests.Response) -> None:
        """
        Map an error response to an exception.

        Raises:
            ResourceNotFoundError: When a user is not found
            RateLimitError: When rate limits are exceeded
            ServerError: For server-side errors
            SourceAPIError: For other errors
        """
        error_detail = None
        try:
            content_type = response.headers.get("Content-Type", "")
            if response.content and "json" in content_type:
                error_data = response.json()
                error_detail = error_data.get("message") or error_data.get("error") or error_data
        except ValueError:
            error_detail = response.text

        status_code = response.status_code
        if status_code == 404:
            raise ResourceNotFoundError(detail=error_detail)
        elif status_code == 429:
            raise RateLimitError(detail=error_detail)
        elif 500 <= status_code < 600:
            raise ServerError(status_code=status_code, detail=error_detail)
        else:
            raise SourceAPIError(
                status_code=status_code,
                detail=error_detail,
                message=f"Source error occurred: {error_detail}",
            )

    def recent_tweets_by_location(self, query: str) -> List[UserProfile]:
        data = self.request("GET", "/search/recent", params={"query": query})
        return [UserProfile.from_dict(item["author"]) for item in (data or {}).get("data", [])]

    def followers_of(self, user_id: str, k: int) -> List[str]:
        data = self.request("GET", f"/users/{user_id}/followers", params={"count": k})
        return [str(i) for i in (data or {}).get("ids", [])][:k]

    def friends_of(self, user_id: str, k: int) -> List[str]:
        data = self.request("GET", f"/users/{user_id}/friends", params={"count": k})
        return [str(i) for i in (data or {}).get("ids", [])][:k]

    def user_profile(self, user_id: str) -> UserProfile:
        return UserProfile.from_dict(self.request("GET", f"/users/{user_id}"))

    def profile_bio(self, user_id: str) -> str:
        return self.user_profile(user_id).bio

    def user_timeline(self, user_id: str, cap: int = TIMELINE_CAP) -> Timeline:
        check_cap(cap)
        data = self.request("GET", f"/users/{user_id}/timeline", params={"count": cap}) or {}
        tweets = data.get("tweets", [])[:cap]
        return parse_record({"user_id": user_id, "class": UserClass.GENERIC.value, "tweets": tweets})
