"""SQLite persistence: schema, idempotent batch upserts, SQL dumps and integrity checks.

Conventions of the schema contract:
  * timestamps are TEXT in UTC, ``YYYY-MM-DDTHH:MM:SSZ``;
  * booleans are INTEGER 0/1, so ``before_change = True`` works in SQLite;
  * ``diff_parsed`` is canonical JSON ``{"added": [[line, text], ...], "deleted": [...]}``
    with sorted keys and no insignificant whitespace;
  * ``parameters``, ``reference_json`` and ``problemtype_json`` are JSON arrays;
  * file_change.complexity is the sum of the cyclomatic complexity of the
    file's functions after the change.
"""

from __future__ import annotations

import gzip
import json
import logging
import sqlite3
import threading
from contextlib import closing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from vulnmine.changes import CommitChange, FileChange, MethodChange
from vulnmine.cwe import CweAssignment, CweEntry
from vulnmine.feeds import CveRecord
from vulnmine.forges import RepositoryMeta

logger = logging.getLogger(__name__)

TABLES = ("cve", "cwe", "cwe_classification", "repository", "commits", "fixes", "file_change", "method_change")

SCHEMA = """
CREATE TABLE IF NOT EXISTS cve (
    cve_id TEXT PRIMARY KEY,
    published_date TEXT NOT NULL,
    last_modified_date TEXT NOT NULL,
    description TEXT NOT NULL,
    severity TEXT,
    cvss2_vector_string TEXT,
    cvss2_access_vector TEXT,
    cvss2_access_complexity TEXT,
    cvss2_authentication TEXT,
    cvss2_confidentiality_impact TEXT,
    cvss2_integrity_impact TEXT,
    cvss2_availability_impact TEXT,
    cvss2_base_score REAL CHECK (cvss2_base_score BETWEEN 0 AND 10),
    cvss3_vector_string TEXT,
    cvss3_attack_vector TEXT,
    cvss3_attack_complexity TEXT,
    cvss3_privileges_required TEXT,
    cvss3_user_interaction TEXT,
    cvss3_scope TEXT,
    cvss3_confidentiality_impact TEXT,
    cvss3_integrity_impact TEXT,
    cvss3_availability_impact TEXT,
    cvss3_base_score REAL CHECK (cvss3_base_score BETWEEN 0 AND 10),
    cvss3_base_severity TEXT,
    exploitability_score REAL CHECK (exploitability_score BETWEEN 0 AND 10),
    impact_score REAL CHECK (impact_score BETWEEN 0 AND 10),
    reference_json TEXT NOT NULL,
    problemtype_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS cwe (
    cwe_id TEXT PRIMARY KEY,
    cwe_name TEXT NOT NULL,
    description TEXT NOT NULL,
    extended_description TEXT,
    url TEXT,
    is_category INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS cwe_classification (
    cve_id TEXT NOT NULL REFERENCES cve(cve_id),
    cwe_id TEXT NOT NULL REFERENCES cwe(cwe_id),
    PRIMARY KEY (cve_id, cwe_id)
);
CREATE TABLE IF NOT EXISTS repository (
    repo_url TEXT PRIMARY KEY,
    repo_name TEXT NOT NULL,
    description TEXT,
    date_created TEXT,
    date_last_push TEXT,
    homepage TEXT,
    repo_language TEXT,
    forks_count INTEGER NOT NULL,
    stars_count INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS commits (
    hash TEXT PRIMARY KEY,
    repo_url TEXT NOT NULL REFERENCES repository(repo_url),
    author_name TEXT NOT NULL,
    author_date TEXT NOT NULL,
    committer_date TEXT NOT NULL,
    message TEXT NOT NULL,
    is_merge INTEGER NOT NULL,
    num_lines_added INTEGER NOT NULL,
    num_lines_deleted INTEGER NOT NULL,
    dmm_unit_size REAL,
    dmm_unit_complexity REAL,
    dmm_unit_interfacing REAL
);
CREATE TABLE IF NOT EXISTS fixes (
    cve_id TEXT NOT NULL REFERENCES cve(cve_id),
    hash TEXT NOT NULL REFERENCES commits(hash),
    repo_url TEXT NOT NULL REFERENCES repository(repo_url),
    PRIMARY KEY (cve_id, hash)
);
CREATE TABLE IF NOT EXISTS file_change (
    file_change_id TEXT PRIMARY KEY,
    hash TEXT NOT NULL REFERENCES commits(hash),
    filename TEXT NOT NULL,
    old_path TEXT,
    new_path TEXT,
    change_type TEXT NOT NULL CHECK (change_type IN ('added', 'deleted', 'modified', 'renamed')),
    diff TEXT NOT NULL,
    diff_parsed TEXT NOT NULL,
    num_lines_added INTEGER NOT NULL,
    num_lines_deleted INTEGER NOT NULL,
    code_before TEXT,
    code_after TEXT,
    nloc INTEGER,
    complexity INTEGER,
    token_count INTEGER,
    programming_language TEXT
);
CREATE TABLE IF NOT EXISTS method_change (
    method_change_id TEXT PRIMARY KEY,
    file_change_id TEXT NOT NULL REFERENCES file_change(file_change_id),
    name TEXT NOT NULL,
    signature TEXT NOT NULL,
    parameters TEXT NOT NULL,
    start_line INTEGER NOT NULL,
    end_line INTEGER NOT NULL,
    code TEXT NOT NULL,
    nloc INTEGER NOT NULL,
    complexity INTEGER NOT NULL,
    token_count INTEGER NOT NULL,
    before_change INTEGER NOT NULL,
    CHECK (start_line <= end_line)
);
CREATE INDEX IF NOT EXISTS idx_fixes_hash ON fixes(hash);
CREATE INDEX IF NOT EXISTS idx_commits_repo ON commits(repo_url);
CREATE INDEX IF NOT EXISTS idx_file_change_hash ON file_change(hash);
CREATE INDEX IF NOT EXISTS idx_method_change_file ON method_change(file_change_id);
CREATE INDEX IF NOT EXISTS idx_classification_cwe ON cwe_classification(cwe_id);
"""

PRIMARY_KEYS = {
    "cve": ("cve_id",),
    "cwe": ("cwe_id",),
    "cwe_classification": ("cve_id", "cwe_id"),
    "repository": ("repo_url",),
    "commits": ("hash",),
    "fixes": ("cve_id", "hash"),
    "file_change": ("file_change_id",),
    "method_change": ("method_change_id",),
}


class BatchRejected(RuntimeError):
    """A batch broke a constraint; nothing from it was written."""


@dataclass(frozen=True)
class FixRow:
    cve_id: str
    hash: str
    repo_url: str


@dataclass
class Batch:
    cves: list[CveRecord] = field(default_factory=list)
    cwes: list[CweEntry] = field(default_factory=list)
    classifications: list[CweAssignment] = field(default_factory=list)
    repositories: list[RepositoryMeta] = field(default_factory=list)
    commits: list[CommitChange] = field(default_factory=list)
    fixes: list[FixRow] = field(default_factory=list)
    files: list[FileChange] = field(default_factory=list)
    methods: list[MethodChange] = field(default_factory=list)


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# -- row builders --------------------------------------------------------------------

def cve_row(record: CveRecord) -> dict:
    v2, v3 = record.cvss2, record.cvss3
    return {
        "cve_id": record.cve_id,
        "published_date": record.published_date,
        "last_modified_date": record.last_modified_date,
        "description": record.description,
        "severity": record.severity,
        "cvss2_vector_string": v2.vector_string if v2 else None,
        "cvss2_access_vector": v2.access_vector if v2 else None,
        "cvss2_access_complexity": v2.access_complexity if v2 else None,
        "cvss2_authentication": v2.authentication if v2 else None,
        "cvss2_confidentiality_impact": v2.confidentiality_impact if v2 else None,
        "cvss2_integrity_impact": v2.integrity_impact if v2 else None,
        "cvss2_availability_impact": v2.availability_impact if v2 else None,
        "cvss2_base_score": v2.base_score if v2 else None,
        "cvss3_vector_string": v3.vector_string if v3 else None,
        "cvss3_attack_vector": v3.attack_vector if v3 else None,
        "cvss3_attack_complexity": v3.attack_complexity if v3 else None,
        "cvss3_privileges_required": v3.privileges_required if v3 else None,
        "cvss3_user_interaction": v3.user_interaction if v3 else None,
        "cvss3_scope": v3.scope if v3 else None,
        "cvss3_confidentiality_impact": v3.confidentiality_impact if v3 else None,
        "cvss3_integrity_impact": v3.integrity_impact if v3 else None,
        "cvss3_availability_impact": v3.availability_impact if v3 else None,
        "cvss3_base_score": v3.base_score if v3 else None,
        "cvss3_base_severity": v3.base_severity if v3 else None,
        "exploitability_score": record.exploitability_score,
        "impact_score": record.impact_score,
        "reference_json": canonical_json([
            {"url": r.url, "name": r.name, "refsource": r.refsource, "tags": list(r.tags)}
            for r in record.references
        ]),
        "problemtype_json": canonical_json(list(record.problem_types)),
    }


def cwe_row(entry: CweEntry) -> dict:
    return {"cwe_id": entry.cwe_id, "cwe_name": entry.name, "description": entry.description,
            "extended_description": entry.extended_description, "url": entry.url,
            "is_category": int(entry.is_category)}


def repository_row(meta: RepositoryMeta) -> dict:
    return dict(vars(meta))


def commit_row(commit: CommitChange) -> dict:
    row = dict(vars(commit))
    row["is_merge"] = int(commit.is_merge)
    return row


def file_row(fc: FileChange) -> dict:
    return {
        "file_change_id": fc.file_change_id, "hash": fc.hash, "filename": fc.filename,
        "old_path": fc.old_path, "new_path": fc.new_path, "change_type": fc.change_type.value,
        "diff": fc.diff, "diff_parsed": canonical_json(fc.diff_parsed.as_dict()),
        "num_lines_added": fc.num_lines_added, "num_lines_deleted": fc.num_lines_deleted,
        "code_before": fc.code_before, "code_after": fc.code_after, "nloc": fc.nloc,
        "complexity": fc.complexity, "token_count": fc.token_count,
        "programming_language": fc.programming_language,
    }


def method_row(m: MethodChange) -> dict:
    return {
        "method_change_id": m.method_change_id, "file_change_id": m.file_change_id, "name": m.name,
        "signature": m.signature, "parameters": canonical_json(list(m.parameters)),
        "start_line": m.start_line, "end_line": m.end_line, "code": m.code, "nloc": m.nloc,
        "complexity": m.complexity, "token_count": m.token_count, "before_change": int(m.before_change),
    }


# -- connection and writes --------------------------------------------------------------

def connect(path: str | Path, read_only: bool = False) -> sqlite3.Connection:
    path = Path(path)
    if read_only:
        conn = sqlite3.connect(f"{path.resolve().as_uri()}?mode=ro", uri=True, check_same_thread=False)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        conn = sqlite3.connect(path, check_same_thread=False)
    conn.isolation_level = None  # explicit BEGIN/COMMIT below
    conn.execute("PRAGMA foreign_keys = ON")
    return conn


def create_schema(conn: sqlite3.Connection) -> None:
    conn.executescript(SCHEMA)


def table_counts(conn: sqlite3.Connection) -> dict[str, int]:
    return {t: conn.execute(f"SELECT COUNT(*) FROM {t}").fetchone()[0] for t in TABLES}


def _upsert(conn: sqlite3.Connection, table: str, rows: Sequence[dict]) -> None:
    if not rows:
        return
    columns = list(rows[0])
    keys = PRIMARY_KEYS[table]
    updates = [c for c in columns if c not in keys]
    sql = (f"INSERT INTO {table} ({', '.join(columns)}) VALUES ({', '.join('?' for _ in columns)}) "
           f"ON CONFLICT ({', '.join(keys)}) DO ")
    if updates:
        sql += "UPDATE SET " + ", ".join(f"{c} = excluded.{c}" for c in updates)
    else:
        sql += "NOTHING"
    conn.executemany(sql, [tuple(r[c] for c in columns) for r in rows])


class Store:
    """The single writer. Each ``persist`` call is one transaction."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.conn = connect(self.path)
        create_schema(self.conn)
        self._lock = threading.Lock()

    def close(self) -> None:
        self.conn.close()

    def __enter__(self) -> Store:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def counts(self) -> dict[str, int]:
        with self._lock:
            return table_counts(self.conn)

    def persist(self, batch: Batch) -> dict[str, int]:
        """Upsert a batch atomically; returns the number of new rows per table.

        Raises BatchRejected (after rolling back) on any constraint violation.
        """
        plan = [
            ("cve", [cve_row(c) for c in batch.cves]),
            ("cwe", [cwe_row(c) for c in batch.cwes]),
            ("cwe_classification", [{"cve_id": a.cve_id, "cwe_id": a.cwe_id} for a in batch.classifications]),
            ("repository", [repository_row(r) for r in batch.repositories]),
            ("commits", [commit_row(c) for c in batch.commits]),
            ("fixes", [{"cve_id": f.cve_id, "hash": f.hash, "repo_url": f.repo_url} for f in batch.fixes]),
            ("file_change", [file_row(f) for f in batch.files]),
            ("method_change", [method_row(m) for m in batch.methods]),
        ]
        with self._lock:
            before = table_counts(self.conn)
            self.conn.execute("BEGIN IMMEDIATE")
            try:
                # foreign keys are enforced per statement, so a dangling row fails here
                for table, rows in plan:
                    _upsert(self.conn, table, rows)
            except sqlite3.Error as exc:
                self.conn.execute("ROLLBACK")
                raise BatchRejected(str(exc)) from exc
            self.conn.execute("COMMIT")
            after = table_counts(self.conn)
        return {t: after[t] - before[t] for t in TABLES}


def persist(path: str | Path, batch: Batch) -> dict[str, int]:
    with Store(path) as store:
        return store.persist(batch)


# -- dumps -------------------------------------------------------------------------------

DUMP_HEADER = "PRAGMA foreign_keys=OFF;\n"


def dump_text(conn: sqlite3.Connection) -> str:
    return DUMP_HEADER + "\n".join(conn.iterdump()) + "\n"


def export_dump(db_path: str | Path, out_path: str | Path | None = None) -> str:
    """SQL text that rebuilds the database; written to ``out_path`` (gzip if it ends in .gz)."""
    with closing(connect(db_path, read_only=True)) as conn:
        text = dump_text(conn)
    if out_path is not None:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        if out.suffix == ".gz":
            out.write_bytes(gzip.compress(data, mtime=0))
        else:
            out.write_bytes(data)
    return text


def read_dump(path: str | Path) -> str:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw.decode("utf-8")


def load_dump(dump: str, db_path: str | Path) -> None:
    """Replay a dump into a new database file and verify its foreign keys."""
    db_path = Path(db_path)
    if db_path.exists():
        raise FileExistsError(db_path)
    db_path.parent.mkdir(parents=True, exist_ok=True)
    with closing(sqlite3.connect(db_path)) as conn:
        conn.executescript(dump)
        problems = conn.execute("PRAGMA foreign_key_check").fetchall()
    if problems:
        raise BatchRejected(f"dump has foreign key violations: {problems[:5]}")


# -- reading ------------------------------------------------------------------------------

def run_query(db_path: str | Path, sql: str, params: Iterable = ()) -> tuple[list[str], list[tuple]]:
    """Run one statement read-only; SQL errors propagate unchanged."""
    with closing(connect(db_path, read_only=True)) as conn:
        cursor = conn.execute(sql, tuple(params))
        columns = [d[0] for d in cursor.description or ()]
        return columns, cursor.fetchall()


REVERSE_ORPHANS = {
    "cve without fixes": "SELECT cve_id FROM cve WHERE cve_id NOT IN (SELECT cve_id FROM fixes)",
    "commit without fixes": "SELECT hash FROM commits WHERE hash NOT IN (SELECT hash FROM fixes)",
    "repository without commits": "SELECT repo_url FROM repository WHERE repo_url NOT IN (SELECT repo_url FROM commits)",
    "cve without classification": "SELECT cve_id FROM cve WHERE cve_id NOT IN (SELECT cve_id FROM cwe_classification)",
}


def integrity_problems(conn: sqlite3.Connection) -> list[str]:
    """Every foreign-key orphan (both directions) and storage-level corruption; empty when clean."""
    problems: list[str] = []
    status = conn.execute("PRAGMA integrity_check").fetchone()[0]
    if status != "ok":
        problems.append(f"integrity_check: {status}")
    for table, rowid, parent, _ in conn.execute("PRAGMA foreign_key_check").fetchall():
        problems.append(f"{table} row {rowid} references missing {parent}")
    for label, sql in REVERSE_ORPHANS.items():
        for row in conn.execute(sql).fetchall():
            problems.append(f"{label}: {row}")
    return problems


def check_integrity(db_path: str | Path) -> list[str]:
    with closing(connect(db_path, read_only=True)) as conn:
        return integrity_problems(conn)
