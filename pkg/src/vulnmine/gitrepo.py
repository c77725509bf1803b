"""Thin wrapper over the git command line for cloning and reading commits."""

from __future__ import annotations

import hashlib
import logging
import os
import re
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from vulnmine.feeds import normalize_timestamp
from vulnmine.forges import RepoUnavailable

logger = logging.getLogger(__name__)

EMPTY_TREE = "4b825dc642cb6eb9a060e54bf8d69288fbee4904"
NULL_SHA = "0" * 40
_FULL_HASH = re.compile(r"^[0-9a-f]{40}$")


class GitError(RuntimeError):
    pass


class CommitNotFound(LookupError):
    def __init__(self, repo_url: str, commit: str):
        super().__init__(f"{commit} not found in {repo_url}")
        self.repo_url = repo_url
        self.commit = commit


def _env() -> dict[str, str]:
    env = dict(os.environ)
    env.update({
        "GIT_TERMINAL_PROMPT": "0",
        "GIT_ASKPASS": "echo",
        "GIT_LITERAL_PATHSPECS": "1",
        "GIT_PAGER": "cat",
        "LC_ALL": "C",
    })
    return env


def run_git(args: list[str], cwd: Path | None = None, check: bool = True, timeout: float | None = None) -> bytes:
    proc = subprocess.run(
        ["git", *args], cwd=cwd, env=_env(), stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        timeout=timeout,
    )
    if check and proc.returncode != 0:
        raise GitError(f"git {' '.join(args[:3])} failed: {proc.stderr.decode('utf-8', 'replace').strip()}")
    return proc.stdout


def _path(raw: bytes) -> str:
    return raw.decode("utf-8", "surrogateescape")


@dataclass(frozen=True)
class CommitInfo:
    hash: str
    parents: tuple[str, ...]
    author_name: str
    author_date: str
    committer_date: str
    message: str


@dataclass(frozen=True)
class RawChange:
    """One line of ``git diff --raw``: status letter, paths and blob ids."""

    status: str
    old_path: str | None
    new_path: str | None
    old_blob: str | None
    new_blob: str | None


class GitRepo:
    def __init__(self, path: Path, repo_url: str, owned: bool = False):
        self.path = Path(path)
        self.repo_url = repo_url
        self.owned = owned

    def __enter__(self) -> GitRepo:
        return self

    def __exit__(self, *exc) -> None:
        self.cleanup()

    def cleanup(self) -> None:
        if self.owned and self.path.exists():
            shutil.rmtree(self.path, ignore_errors=True)

    def git(self, *args: str) -> bytes:
        return run_git(list(args), cwd=self.path)

    def expand(self, commit: str) -> str:
        """Full 40-hex id for a full or abbreviated commit hash."""
        out = run_git(["rev-parse", "--verify", "--quiet", f"{commit}^{{commit}}"], cwd=self.path, check=False)
        full = out.decode().strip()
        if not _FULL_HASH.match(full):
            raise CommitNotFound(self.repo_url, commit)
        return full

    def head(self) -> str:
        return self.expand("HEAD")

    def commit_info(self, commit: str) -> CommitInfo:
        raw = self.git("show", "-s", "--no-show-signature", "--format=%H%x00%P%x00%an%x00%aI%x00%cI%x00%B", commit)
        fields = raw.decode("utf-8", "replace").split("\x00", 5)
        message = fields[5].rstrip("\n")
        return CommitInfo(
            hash=fields[0],
            parents=tuple(fields[1].split()),
            author_name=fields[2],
            author_date=normalize_timestamp(fields[3]),
            committer_date=normalize_timestamp(fields[4]),
            message=message,
        )

    def raw_changes(self, parent: str | None, commit: str) -> list[RawChange]:
        base = parent or EMPTY_TREE
        out = self.git("diff", "--raw", "-z", "-M", "--no-abbrev", base, commit)
        items = out.split(b"\x00")
        changes: list[RawChange] = []
        i = 0
        while i < len(items) and items[i]:
            meta = items[i].decode()
            i += 1
            _, _, old_blob, new_blob, status = meta[1:].split(" ", 4)
            letter = status[0]
            if letter in "RC":
                old_path, new_path = _path(items[i]), _path(items[i + 1])
                i += 2
            else:
                path = _path(items[i])
                i += 1
                old_path = None if letter == "A" else path
                new_path = None if letter == "D" else path
            changes.append(RawChange(
                letter, old_path, new_path,
                None if old_blob == NULL_SHA else old_blob,
                None if new_blob == NULL_SHA else new_blob,
            ))
        return changes

    def blob(self, blob_id: str) -> bytes:
        return self.git("cat-file", "blob", blob_id)

    def blob_size(self, blob_id: str) -> int:
        return int(self.git("cat-file", "-s", blob_id).decode().strip())

    def file_diff(self, parent: str | None, commit: str, paths: list[str]) -> bytes:
        base = parent or EMPTY_TREE
        return self.git("diff", "-M", "--no-color", "--no-ext-diff", "--full-index", base, commit, "--", *paths)


def clone_dir_name(repo_url: str) -> str:
    tail = re.sub(r"[^A-Za-z0-9._-]+", "_", repo_url.rstrip("/").rsplit("/", 1)[-1])
    return f"{tail}-{hashlib.sha1(repo_url.encode()).hexdigest()[:10]}"


def clone_repo(repo_url: str, workdir: Path, timeout: float | None = 3600) -> GitRepo:
    """Full-history bare clone of ``repo_url`` under ``workdir``.

    Raises RepoUnavailable when the repository cannot be cloned. The returned
    handle deletes the clone on ``cleanup()``.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    dest = workdir / clone_dir_name(repo_url)
    if dest.exists():
        shutil.rmtree(dest)
    try:
        run_git(["clone", "--bare", "--quiet", repo_url, str(dest)], timeout=timeout)
    except (GitError, subprocess.TimeoutExpired) as exc:
        shutil.rmtree(dest, ignore_errors=True)
        raise RepoUnavailable(repo_url, str(exc)) from exc
    logger.info("cloned %s", repo_url)
    return GitRepo(dest, repo_url, owned=True)


def open_repo(path: Path, repo_url: str | None = None) -> GitRepo:
    """Handle on an existing local repository (never deleted by cleanup)."""
    path = Path(path)
    if run_git(["rev-parse", "--git-dir"], cwd=path, check=False) == b"":
        raise RepoUnavailable(repo_url or str(path), "not a git repository")
    return GitRepo(path, repo_url or str(path))
