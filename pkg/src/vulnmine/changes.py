"""Commit, file and method level change records for a fix commit."""

from __future__ import annotations

import hashlib
import logging
import posixpath
import re
from dataclasses import dataclass, field
from enum import Enum

from vulnmine import kernels
from vulnmine.gitrepo import GitRepo, RawChange
from vulnmine.metrics import (
    SUPPORTED_METHOD_LANGUAGES, cyclomatic_complexity, detect_language, dmm_scores, find_methods,
    nloc, token_count,
)

logger = logging.getLogger(__name__)

MAX_TEXT_BYTES = 2 * 1024 * 1024
_BINARY_MARKERS = re.compile(rb"^(?:Binary files .* differ|GIT binary patch)$", re.MULTILINE)


class DiffParseError(ValueError):
    def __init__(self, header: str):
        super().__init__(f"malformed hunk header: {header!r}")
        self.header = header


class ChangeType(str, Enum):
    ADDED = "added"
    DELETED = "deleted"
    MODIFIED = "modified"
    RENAMED = "renamed"


_STATUS = {"A": ChangeType.ADDED, "D": ChangeType.DELETED, "M": ChangeType.MODIFIED,
           "T": ChangeType.MODIFIED, "R": ChangeType.RENAMED, "C": ChangeType.ADDED}


@dataclass
class DiffParsed:
    added: list[tuple[int, str]] = field(default_factory=list)
    deleted: list[tuple[int, str]] = field(default_factory=list)

    def as_dict(self) -> dict[str, list[list]]:
        return {"added": [list(p) for p in self.added], "deleted": [list(p) for p in self.deleted]}


@dataclass
class MethodChange:
    method_change_id: str
    file_change_id: str
    name: str
    signature: str
    parameters: list[str]
    start_line: int
    end_line: int
    code: str
    nloc: int
    complexity: int
    token_count: int
    before_change: bool
    changed_lines: tuple[int, ...] = ()


@dataclass
class FileChange:
    file_change_id: str
    hash: str
    filename: str
    old_path: str | None
    new_path: str | None
    change_type: ChangeType
    diff: str
    diff_parsed: DiffParsed
    num_lines_added: int
    num_lines_deleted: int
    code_before: str | None = None
    code_after: str | None = None
    nloc: int | None = None
    complexity: int | None = None
    token_count: int | None = None
    programming_language: str | None = None


@dataclass
class CommitChange:
    hash: str
    repo_url: str
    author_name: str
    author_date: str
    committer_date: str
    message: str
    is_merge: bool
    num_lines_added: int
    num_lines_deleted: int
    dmm_unit_size: float | None = None
    dmm_unit_complexity: float | None = None
    dmm_unit_interfacing: float | None = None


@dataclass
class ExtractedCommit:
    commit: CommitChange
    files: list[FileChange]
    methods: list[MethodChange]


# -- diff parsing -------------------------------------------------------------

def parse_diff(diff: str) -> DiffParsed:
    """Added lines numbered in the post-image, deleted lines in the pre-image.

    Context lines, file headers and "\\ No newline at end of file" markers are
    not reported. Lines are split on "\\n" only, so a carriage return stays
    part of the line text.
    """
    try:
        added, deleted = kernels.parse_hunks(diff)
    except ValueError as exc:
        raise DiffParseError(str(exc.args[0]) if exc.args else "") from exc
    return DiffParsed(added, deleted)


def _eof_state(diff: str) -> tuple[bool, bool, int | None]:
    """(before lacks final newline, after lacks final newline, last post-image line a hunk covers)."""
    before_missing = after_missing = False
    last_new: int | None = None
    previous = ""
    for line in diff.split("\n"):
        if line.startswith("@@"):
            m = re.match(r"^@@ -\d+(?:,\d+)? \+(\d+)(?:,(\d+))? @@", line)
            if m:
                start, length = int(m.group(1)), int(m.group(2) or 1)
                last_new = start + length - 1
        elif line.startswith("\\") and previous:
            tag = previous[0]
            if tag in "- ":
                before_missing = True
            if tag in "+ ":
                after_missing = True
        previous = line
    return before_missing, after_missing, last_new


def apply_diff(before: str, diff: str) -> str:
    """Rebuild the post-image from ``before`` using only the parsed diff.

    Used to check that the added/deleted line sets describe the change
    completely; the final-newline state is read from the diff's markers.
    """
    parsed = parse_diff(diff)
    _, after_missing, last_new = _eof_state(diff)
    segments = before.split("\n")
    before_eol = segments[-1] == ""
    lines = segments[:-1] if before_eol else segments
    deleted = {n for n, _ in parsed.deleted}
    result = [text for n, text in enumerate(lines, 1) if n not in deleted]
    for n, text in parsed.added:
        result.insert(n - 1, text)
    if not result:
        return ""
    touched_end = last_new is not None and last_new >= len(result)
    after_eol = (not after_missing) if touched_end else before_eol
    return "\n".join(result) + ("\n" if after_eol else "")


# -- identifiers ----------------------------------------------------------------

def _digest(*parts: str) -> str:
    return hashlib.sha256("\x00".join(parts).encode("utf-8", "surrogateescape")).hexdigest()[:32]


def file_change_id(repo_url: str, commit: str, old_path: str | None, new_path: str | None) -> str:
    return _digest(repo_url, commit, old_path or "", new_path or "")


def method_change_id(file_id: str, signature: str, before_change: bool, occurrence: int = 0) -> str:
    parts = [file_id, signature, "1" if before_change else "0"]
    if occurrence:
        parts.append(str(occurrence))
    return _digest(*parts)


# -- file level ---------------------------------------------------------------

def _decode(raw: bytes) -> str:
    return raw.decode("utf-8", "replace")


def _read_blob(repo: GitRepo, blob: str | None) -> tuple[bytes | None, bool]:
    """(content, too_large)."""
    if blob is None:
        return None, False
    if repo.blob_size(blob) > MAX_TEXT_BYTES:
        return None, True
    return repo.blob(blob), False


def _file_metrics(code: str | None, language: str | None) -> tuple[int | None, int | None, int | None]:
    if code is None:
        return None, None, None
    complexity = None
    if language in SUPPORTED_METHOD_LANGUAGES:
        spans = find_methods(code, language) or []
        lines = code.split("\n")
        complexity = sum(cyclomatic_complexity("\n".join(lines[s.start_line - 1:s.end_line]), language) or 1
                         for s in spans)
    return nloc(code, language), complexity, token_count(code, language)


def build_file_change(repo: GitRepo, commit: str, parent: str | None, raw: RawChange) -> FileChange:
    paths = [p for p in dict.fromkeys([raw.old_path, raw.new_path]) if p]
    diff_bytes = repo.file_diff(parent, commit, paths)
    before_raw, before_big = _read_blob(repo, raw.old_blob)
    after_raw, after_big = _read_blob(repo, raw.new_blob)
    binary = bool(_BINARY_MARKERS.search(diff_bytes)) or before_big or after_big
    for content in (before_raw, after_raw):
        if content is not None and b"\x00" in content:
            binary = True

    change_type = _STATUS.get(raw.status, ChangeType.MODIFIED)
    filename = posixpath.basename(raw.new_path or raw.old_path or "")
    diff = _decode(diff_bytes)
    fc = FileChange(
        file_change_id=file_change_id(repo.repo_url, commit, raw.old_path, raw.new_path),
        hash=commit,
        filename=filename,
        old_path=raw.old_path,
        new_path=raw.new_path,
        change_type=change_type,
        diff=diff,
        diff_parsed=DiffParsed(),
        num_lines_added=0,
        num_lines_deleted=0,
    )
    if binary:
        return fc

    fc.code_before = _decode(before_raw) if before_raw is not None else None
    fc.code_after = _decode(after_raw) if after_raw is not None else None
    fc.diff_parsed = parse_diff(diff)
    fc.num_lines_added = len(fc.diff_parsed.added)
    fc.num_lines_deleted = len(fc.diff_parsed.deleted)
    sample = after_raw if after_raw is not None else before_raw
    fc.programming_language = detect_language(filename, sample)
    fc.nloc, fc.complexity, fc.token_count = _file_metrics(fc.code_after, fc.programming_language)
    return fc


def first_parent(repo: GitRepo, commit: str) -> str | None:
    parents = repo.commit_info(commit).parents
    return parents[0] if parents else None


def extract_file_changes(repo: GitRepo, commit: str) -> list[FileChange]:
    """One FileChange per path changed relative to the first parent."""
    commit = repo.expand(commit)
    parent = first_parent(repo, commit)
    return [build_file_change(repo, commit, parent, raw) for raw in repo.raw_changes(parent, commit)]


# -- method level -----------------------------------------------------------------

def _methods_for_image(fc: FileChange, code: str, touched: list[int], before: bool) -> list[MethodChange]:
    spans = find_methods(code, fc.programming_language)
    if not spans or not touched:
        return []
    lines = code.split("\n")
    out: list[MethodChange] = []
    seen: dict[str, int] = {}
    for span in spans:
        hit = tuple(n for n in touched if span.start_line <= n <= span.end_line)
        if not hit:
            continue
        body = "\n".join(lines[span.start_line - 1:span.end_line])
        occurrence = seen.get(span.signature, 0)
        seen[span.signature] = occurrence + 1
        out.append(MethodChange(
            method_change_id=method_change_id(fc.file_change_id, span.signature, before, occurrence),
            file_change_id=fc.file_change_id,
            name=span.name,
            signature=span.signature,
            parameters=list(span.parameters),
            start_line=span.start_line,
            end_line=span.end_line,
            code=body,
            nloc=nloc(body, fc.programming_language),
            complexity=cyclomatic_complexity(body, fc.programming_language) or 1,
            token_count=token_count(body, fc.programming_language),
            before_change=before,
            changed_lines=hit,
        ))
    return out


def extract_method_changes(fc: FileChange) -> list[MethodChange]:
    """Methods of the pre-image hit by a deleted line and of the post-image hit by an added line."""
    if fc.programming_language not in SUPPORTED_METHOD_LANGUAGES:
        return []
    methods: list[MethodChange] = []
    if fc.code_before is not None:
        methods += _methods_for_image(fc, fc.code_before, [n for n, _ in fc.diff_parsed.deleted], True)
    if fc.code_after is not None:
        methods += _methods_for_image(fc, fc.code_after, [n for n, _ in fc.diff_parsed.added], False)
    return methods


# -- commit level ---------------------------------------------------------------------

def extract(repo: GitRepo, commit: str) -> ExtractedCommit:
    """Commit record plus its file and method changes, diffed against the first parent."""
    full = repo.expand(commit)
    info = repo.commit_info(full)
    parent = info.parents[0] if info.parents else None
    files = [build_file_change(repo, full, parent, raw) for raw in repo.raw_changes(parent, full)]
    methods = [m for fc in files for m in extract_method_changes(fc)]
    scores = dmm_scores(methods)
    record = CommitChange(
        hash=full,
        repo_url=repo.repo_url,
        author_name=info.author_name,
        author_date=info.author_date,
        committer_date=info.committer_date,
        message=info.message,
        is_merge=len(info.parents) > 1,
        num_lines_added=sum(f.num_lines_added for f in files),
        num_lines_deleted=sum(f.num_lines_deleted for f in files),
        dmm_unit_size=scores.unit_size,
        dmm_unit_complexity=scores.unit_complexity,
        dmm_unit_interfacing=scores.unit_interfacing,
    )
    return ExtractedCommit(record, files, methods)


def extract_commit(repo: GitRepo, commit: str) -> CommitChange:
    return extract(repo, commit).commit
