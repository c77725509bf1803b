"""Repository metadata from the GitHub, GitLab and Bitbucket REST APIs.

Every client draws from one token bucket per forge, shared by all workers.
A response signalling an exhausted quota raises RateLimited; ``Throttle``
sleeps until the advertised reset and retries a bounded number of times.
"""

from __future__ import annotations

import base64
import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol, TypeVar
from urllib.parse import quote, urlsplit

import requests

from vulnmine.feeds import normalize_timestamp
from vulnmine.references import FixReference, Forge

logger = logging.getLogger(__name__)

T = TypeVar("T")

HOUR = 3600.0
# requests per hour; GitHub's are documented, the others are conservative picks
LIMITS = {
    Forge.GITHUB: (5000, 60),
    Forge.GITLAB: (5000, 500),
    Forge.BITBUCKET: (1000, 1000),
}
MISSING_COUNT = -1


class ForgeError(Exception):
    pass


class RepoUnavailable(ForgeError):
    def __init__(self, repo_url: str, reason: str):
        super().__init__(f"{repo_url} unavailable: {reason}")
        self.repo_url = repo_url
        self.reason = reason


class RateLimited(ForgeError):
    def __init__(self, forge: Forge, reset_at: float):
        super().__init__(f"{forge.value} rate limit reached, resets at {reset_at:.0f}")
        self.forge = forge
        self.reset_at = reset_at


class RetriesExhausted(ForgeError):
    def __init__(self, what: str, attempts: int):
        super().__init__(f"{what}: still rate limited after {attempts} attempts")
        self.attempts = attempts


@dataclass(frozen=True)
class Credentials:
    username: str | None = None
    token: str | None = None

    def __bool__(self) -> bool:
        return bool(self.token)


@dataclass(frozen=True)
class RepositoryMeta:
    repo_url: str
    repo_name: str
    description: str | None
    date_created: str | None
    date_last_push: str | None
    homepage: str | None
    repo_language: str | None
    forks_count: int
    stars_count: int


class Clock(Protocol):
    def now(self) -> float: ...
    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class TokenBucket:
    """Holds up to ``capacity`` tokens, refilled at capacity per ``period`` seconds."""

    def __init__(self, capacity: int, period: float = HOUR, clock: Clock | None = None):
        self.capacity = float(capacity)
        self.rate = capacity / period
        self.clock = clock or SystemClock()
        self._tokens = self.capacity
        self._stamp = self.clock.now()
        self._lock = threading.Lock()

    def reserve(self) -> float:
        """Take one token and return how long the caller must wait before using it."""
        with self._lock:
            now = self.clock.now()
            self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
            self._stamp = now
            self._tokens -= 1.0
            if self._tokens >= 0:
                return 0.0
            return -self._tokens / self.rate

    def acquire(self) -> float:
        delay = self.reserve()
        if delay > 0:
            logger.info("self-throttling for %.1f s", delay)
            self.clock.sleep(delay)
        return delay


class Throttle:
    def __init__(self, bucket: TokenBucket, max_retries: int = 3, clock: Clock | None = None):
        self.bucket = bucket
        self.max_retries = max_retries
        self.clock = clock or bucket.clock

    def call(self, fn: Callable[[], T], what: str = "request") -> T:
        attempts = 0
        while True:
            self.bucket.acquire()
            attempts += 1
            try:
                return fn()
            except RateLimited as exc:
                if attempts > self.max_retries:
                    raise RetriesExhausted(what, attempts) from exc
                wait = max(0.0, exc.reset_at - self.clock.now())
                logger.warning("%s; sleeping %.0f s before retry %d/%d", exc, wait, attempts, self.max_retries)
                self.clock.sleep(wait)


def throttle_for(forge: Forge, credentials: Credentials | None, clock: Clock | None = None,
                 max_retries: int = 3) -> Throttle:
    authenticated, anonymous = LIMITS[forge]
    capacity = authenticated if credentials else anonymous
    return Throttle(TokenBucket(capacity, HOUR, clock), max_retries)


def _text_or_none(value) -> str | None:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def _count(value) -> int:
    # never invent a count: anything that is not a non-negative int is the sentinel
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        return MISSING_COUNT
    return value


def _reset_from(headers, clock: Clock, fallback: float = 60.0) -> float:
    lowered = {k.lower(): v for k, v in headers.items()}
    for key in ("x-ratelimit-reset", "ratelimit-reset"):
        if key in lowered:
            try:
                return float(lowered[key])
            except ValueError:
                pass
    if "retry-after" in lowered:
        try:
            return clock.now() + float(lowered["retry-after"])
        except ValueError:
            pass
    return clock.now() + fallback


class ForgeClient:
    forge: Forge
    api_root: str

    def __init__(self, session=None, credentials: Credentials | None = None,
                 throttle: Throttle | None = None, timeout: float = 30.0):
        self.session = session or requests.Session()
        self.credentials = credentials or Credentials()
        self.throttle = throttle or throttle_for(self.forge, self.credentials)
        self.timeout = timeout

    @property
    def clock(self) -> Clock:
        return self.throttle.clock

    def auth_headers(self) -> dict[str, str]:
        return {}

    def _get(self, url: str, repo_url: str, params: dict | None = None):
        def attempt():
            try:
                response = self.session.get(url, params=params, headers=self.auth_headers(), timeout=self.timeout)
            except requests.RequestException as exc:
                raise RepoUnavailable(repo_url, f"request failed: {exc}") from exc
            self._check(response, repo_url)
            return response.json()
        return self.throttle.call(attempt, repo_url)

    def _check(self, response, repo_url: str) -> None:
        status = response.status_code
        if status == 200:
            return
        headers = response.headers or {}
        lowered = {k.lower(): v for k, v in headers.items()}
        if status == 429 or (status == 403 and lowered.get("x-ratelimit-remaining") == "0"):
            raise RateLimited(self.forge, _reset_from(headers, self.clock))
        if status in (404, 410, 451):
            raise RepoUnavailable(repo_url, f"HTTP {status}")
        raise ForgeError(f"{repo_url}: HTTP {status} from {self.forge.value} API")

    def fetch_meta(self, ref: FixReference | str) -> RepositoryMeta:
        raise NotImplementedError


def _repo_path(ref: FixReference | str) -> tuple[str, str, str]:
    repo_url = ref.repo_url if isinstance(ref, FixReference) else ref
    parts = urlsplit(repo_url)
    return repo_url, parts.hostname or "", parts.path.strip("/")


class GitHubClient(ForgeClient):
    forge = Forge.GITHUB
    api_root = "https://api.github.com"

    def auth_headers(self) -> dict[str, str]:
        headers = {"Accept": "application/vnd.github+json"}
        creds = self.credentials
        if creds.token and creds.username:
            pair = base64.b64encode(f"{creds.username}:{creds.token}".encode()).decode()
            headers["Authorization"] = f"Basic {pair}"
        elif creds.token:
            headers["Authorization"] = f"token {creds.token}"
        return headers

    def fetch_meta(self, ref) -> RepositoryMeta:
        repo_url, _, path = _repo_path(ref)
        data = self._get(f"{self.api_root}/repos/{path}", repo_url)
        return RepositoryMeta(
            repo_url=repo_url,
            repo_name=data.get("full_name") or path,
            description=_text_or_none(data.get("description")),
            date_created=normalize_timestamp(data.get("created_at")),
            date_last_push=normalize_timestamp(data.get("pushed_at")),
            homepage=_text_or_none(data.get("homepage")),
            repo_language=_text_or_none(data.get("language")),
            forks_count=_count(data.get("forks_count")),
            stars_count=_count(data.get("stargazers_count")),
        )


class GitLabClient(ForgeClient):
    """Works against gitlab.com and self-hosted ``gitlab.*`` instances."""

    forge = Forge.GITLAB

    def auth_headers(self) -> dict[str, str]:
        return {"PRIVATE-TOKEN": self.credentials.token} if self.credentials.token else {}

    def fetch_meta(self, ref) -> RepositoryMeta:
        repo_url, host, path = _repo_path(ref)
        project = f"https://{host}/api/v4/projects/{quote(path, safe='')}"
        data = self._get(project, repo_url)
        language = None
        try:
            shares = self._get(f"{project}/languages", repo_url)
            if shares:
                language = max(shares.items(), key=lambda kv: (kv[1], kv[0]))[0]
        except ForgeError as exc:
            logger.info("no language breakdown for %s: %s", repo_url, exc)
        return RepositoryMeta(
            repo_url=repo_url,
            repo_name=data.get("path_with_namespace") or path,
            description=_text_or_none(data.get("description")),
            date_created=normalize_timestamp(data.get("created_at")),
            date_last_push=normalize_timestamp(data.get("last_activity_at")),
            homepage=None,
            repo_language=language,
            forks_count=_count(data.get("forks_count")),
            stars_count=_count(data.get("star_count")),
        )


class BitbucketClient(ForgeClient):
    """Bitbucket has no stars, so stars_count is always the -1 sentinel."""

    forge = Forge.BITBUCKET
    api_root = "https://api.bitbucket.org/2.0"

    def auth_headers(self) -> dict[str, str]:
        creds = self.credentials
        if creds.token and creds.username:
            pair = base64.b64encode(f"{creds.username}:{creds.token}".encode()).decode()
            return {"Authorization": f"Basic {pair}"}
        if creds.token:
            return {"Authorization": f"Bearer {creds.token}"}
        return {}

    def fetch_meta(self, ref) -> RepositoryMeta:
        repo_url, _, path = _repo_path(ref)
        base = f"{self.api_root}/repositories/{path}"
        data = self._get(base, repo_url)
        forks = MISSING_COUNT
        try:
            forks = _count(self._get(f"{base}/forks", repo_url, params={"pagelen": 1}).get("size"))
        except ForgeError as exc:
            logger.info("no fork count for %s: %s", repo_url, exc)
        return RepositoryMeta(
            repo_url=repo_url,
            repo_name=data.get("full_name") or path,
            description=_text_or_none(data.get("description")),
            date_created=normalize_timestamp(data.get("created_on")),
            date_last_push=normalize_timestamp(data.get("updated_on")),
            homepage=_text_or_none(data.get("website")),
            repo_language=_text_or_none(data.get("language")),
            forks_count=forks,
            stars_count=MISSING_COUNT,
        )


_CLIENTS = {Forge.GITHUB: GitHubClient, Forge.GITLAB: GitLabClient, Forge.BITBUCKET: BitbucketClient}


class MetaFetcher:
    """One client per forge, so each forge's budget is shared by every caller."""

    def __init__(self, session=None, credentials: dict[Forge, Credentials] | None = None,
                 clock: Clock | None = None, max_retries: int = 3):
        self.session = session or requests.Session()
        credentials = credentials or {}
        self.clients: dict[Forge, ForgeClient] = {}
        for forge, cls in _CLIENTS.items():
            creds = credentials.get(forge) or Credentials()
            throttle = throttle_for(forge, creds, clock, max_retries)
            self.clients[forge] = cls(self.session, creds, throttle)

    def fetch_meta(self, ref: FixReference) -> RepositoryMeta:
        return self.clients[ref.forge].fetch_meta(ref)


def fetch_meta(ref: FixReference, credentials: Credentials | None = None, session=None) -> RepositoryMeta:
    return _CLIENTS[ref.forge](session, credentials).fetch_meta(ref)
