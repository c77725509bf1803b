"""Disk-backed HTTP record/replay so feed and forge traffic can be re-run offline."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlencode

import requests

logger = logging.getLogger(__name__)


@dataclass
class StoredResponse:
    """The subset of ``requests.Response`` the clients rely on."""

    url: str
    status_code: int
    content: bytes
    headers: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status_code < 400

    @property
    def text(self) -> str:
        return self.content.decode("utf-8", "replace")

    def json(self):
        return json.loads(self.content)


def request_key(url: str, params: dict | None = None) -> str:
    full = url if not params else f"{url}?{urlencode(sorted(params.items()))}"
    return hashlib.sha256(full.encode()).hexdigest()[:24]


def save_response(directory: Path, response: StoredResponse, params: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = {"url": response.url, "params": params or {}, "status": response.status_code,
               "headers": dict(response.headers)}
    try:
        payload["body"] = response.content.decode("utf-8")
    except UnicodeDecodeError:
        payload["body_b64"] = base64.b64encode(response.content).decode("ascii")
    path = directory / f"{request_key(response.url, params)}.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    return path


def load_response(path: Path) -> StoredResponse:
    payload = json.loads(Path(path).read_text())
    if "body_b64" in payload:
        body = base64.b64decode(payload["body_b64"])
    else:
        body = payload.get("body", "").encode("utf-8")
    return StoredResponse(payload["url"], int(payload["status"]), body, payload.get("headers") or {})


class ReplaySession:
    """Answers GET requests from a directory of recorded responses.

    Requests with no recording go to ``upstream`` when one is given, and the
    answer is recorded; otherwise they fail like an unreachable host.
    """

    def __init__(self, directory: Path, upstream: requests.Session | None = None):
        self.directory = Path(directory)
        self.upstream = upstream
        self.headers: dict[str, str] = {}
        self.calls: list[str] = []

    def get(self, url: str, params: dict | None = None, headers: dict | None = None,
            timeout: float | None = None) -> StoredResponse:
        self.calls.append(url)
        path = self.directory / f"{request_key(url, params)}.json"
        if path.exists():
            return load_response(path)
        if self.upstream is None:
            raise requests.ConnectionError(f"no recorded response for {url}")
        merged = {**self.headers, **(headers or {})}
        live = self.upstream.get(url, params=params, headers=merged, timeout=timeout)
        stored = StoredResponse(url, live.status_code, live.content, dict(live.headers))
        save_response(self.directory, stored, params)
        logger.debug("recorded %s -> %s", url, live.status_code)
        return stored
