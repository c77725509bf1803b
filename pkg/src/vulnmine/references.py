"""Resolve CVE reference URLs to (cve, repository, commit) fix triples."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from urllib.parse import urlsplit


class Forge(str, Enum):
    GITHUB = "GitHub"
    GITLAB = "GitLab"
    BITBUCKET = "Bitbucket"


@dataclass(frozen=True, order=True)
class FixReference:
    cve_id: str
    repo_url: str
    commit_hash: str
    forge: Forge


# git accepts abbreviations down to 4 hex digits; the clone step expands them
_HASH = r"(?P<hash>[0-9a-fA-F]{4,40})"
_TAIL = r"(?:\.(?:patch|diff))?/?$"

_GITHUB_COMMIT = re.compile(rf"^/(?P<owner>[^/]+)/(?P<repo>[^/]+)/commit/{_HASH}{_TAIL}")
_GITHUB_PULL = re.compile(r"^/[^/]+/[^/]+/pull/\d+")
_GITHUB_COMPARE = re.compile(r"^/[^/]+/[^/]+/compare/")
_GITLAB_COMMIT = re.compile(rf"^/(?P<path>[^-][^?#]*?)/(?:-/)?commit/{_HASH}{_TAIL}")
_GITLAB_MR = re.compile(r"/-/merge_requests/\d+|/merge_requests/\d+")
_GITLAB_COMPARE = re.compile(r"/(?:-/)?compare/")
_BITBUCKET_COMMIT = re.compile(rf"^/(?P<owner>[^/]+)/(?P<repo>[^/]+)/commits/{_HASH}{_TAIL}")
_BITBUCKET_PULL = re.compile(r"^/[^/]+/[^/]+/pull-requests/\d+")


def _host(url: str) -> tuple[str, str]:
    parts = urlsplit(url.strip())
    host = (parts.hostname or "").lower()
    if host.startswith("www."):
        host = host[4:]
    return host, parts.path


def _strip_git(name: str) -> str:
    return name[:-4] if name.endswith(".git") else name


def forge_of(host: str) -> Forge | None:
    if host == "github.com":
        return Forge.GITHUB
    if host == "bitbucket.org":
        return Forge.BITBUCKET
    if host == "gitlab.com" or host.startswith("gitlab."):
        return Forge.GITLAB
    return None


def resolve(url: str, cve_id: str) -> FixReference | None:
    """Recognize a direct commit URL on GitHub, GitLab or Bitbucket.

    Query strings and fragments are ignored; pull-request, merge-request and
    compare URLs are not resolved (see ``classify``).
    """
    host, path = _host(url)
    forge = forge_of(host)
    if forge is None:
        return None
    if forge is Forge.GITHUB:
        m = _GITHUB_COMMIT.match(path)
        if not m:
            return None
        repo_path = f"{m['owner']}/{_strip_git(m['repo'])}"
    elif forge is Forge.BITBUCKET:
        m = _BITBUCKET_COMMIT.match(path)
        if not m:
            return None
        repo_path = f"{m['owner']}/{_strip_git(m['repo'])}"
    else:
        m = _GITLAB_COMMIT.match(path)
        if not m or "/merge_requests/" in path:
            return None
        repo_path = _strip_git(m["path"].rstrip("/"))
        if repo_path.endswith("/-"):
            repo_path = repo_path[:-2]
        if "/" not in repo_path:
            return None
    # forge paths are case-insensitive; lowercase so one repository has one key
    return FixReference(cve_id, f"https://{host}/{repo_path.lower()}", m["hash"].lower(), forge)


def classify(url: str) -> str:
    """Coarse bucket for ingest statistics: commit, pull, compare, forge-other or other."""
    host, path = _host(url)
    forge = forge_of(host)
    if forge is None:
        return "other"
    if resolve(url, "") is not None:
        return "commit"
    if forge is Forge.GITHUB and _GITHUB_PULL.match(path):
        return "pull"
    if forge is Forge.BITBUCKET and _BITBUCKET_PULL.match(path):
        return "pull"
    if forge is Forge.GITLAB and _GITLAB_MR.search(path):
        return "pull"
    if (forge is Forge.GITHUB and _GITHUB_COMPARE.match(path)) or (
        forge is Forge.GITLAB and _GITLAB_COMPARE.search(path)
    ):
        return "compare"
    return "forge-other"


def dedupe(refs: list[FixReference]) -> list[FixReference]:
    """Drop exact duplicate triples, keeping first-seen order.

    The same commit under different CVEs is kept: one fix may cover several
    vulnerabilities.
    """
    seen: set[tuple[str, str, str]] = set()
    out: list[FixReference] = []
    for ref in refs:
        key = (ref.cve_id, ref.repo_url, ref.commit_hash)
        if key not in seen:
            seen.add(key)
            out.append(ref)
    return out
