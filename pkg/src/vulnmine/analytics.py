"""Dataset statistics computed from a populated database, with CSV writers.

Every function opens the database read-only. A project is a repository,
shown under the last segment of its URL; ties in rankings fall back to the
short name and then the full URL, so the order is total.
"""

from __future__ import annotations

import csv
import statistics
from collections import defaultdict
from contextlib import closing
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable

from vulnmine.feeds import parse_timestamp
from vulnmine.storage import connect

RANK_KEYS = ("cves", "commits", "files", "methods")


def short_name(repo_url: str) -> str:
    return repo_url.rstrip("/").rsplit("/", 1)[-1]


def _rows(db_path: str | Path, sql: str, params: Iterable = ()) -> list[tuple]:
    with closing(connect(db_path, read_only=True)) as conn:
        return conn.execute(sql, tuple(params)).fetchall()


def _mean(values: list[float]) -> float | None:
    return statistics.fmean(values) if values else None


# -- summary -------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    metric: str
    value: int


SUMMARY_SQL = {
    "cves": "SELECT COUNT(DISTINCT cve_id) FROM cve",
    "cwe_types": "SELECT COUNT(DISTINCT cwe_id) FROM cwe_classification",
    "projects": "SELECT COUNT(DISTINCT repo_url) FROM repository",
    "commits": "SELECT COUNT(DISTINCT hash) FROM commits",
    "fixes": "SELECT COUNT(*) FROM fixes",
    "files": "SELECT COUNT(DISTINCT file_change_id) FROM file_change",
    "methods": "SELECT COUNT(DISTINCT method_change_id) FROM method_change",
    "languages": "SELECT COUNT(DISTINCT programming_language) FROM file_change "
                 "WHERE programming_language IS NOT NULL",
}


def summary(db_path: str | Path) -> list[SummaryRow]:
    """Distinct counts per level; ``fixes`` counts (CVE, commit) pairs."""
    with closing(connect(db_path, read_only=True)) as conn:
        return [SummaryRow(name, conn.execute(sql).fetchone()[0]) for name, sql in SUMMARY_SQL.items()]


# -- projects ------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectRow:
    project: str
    repo_url: str
    cves: int
    commits: int
    files: int
    methods: int
    avg_cvss2: float | None
    avg_cvss3: float | None
    avg_exploitability: float | None
    avg_impact: float | None


_PROJECT_COUNTS = """
SELECT r.repo_url,
       (SELECT COUNT(DISTINCT fx.cve_id) FROM fixes fx WHERE fx.repo_url = r.repo_url),
       (SELECT COUNT(*) FROM commits c WHERE c.repo_url = r.repo_url),
       (SELECT COUNT(*) FROM file_change f JOIN commits c ON c.hash = f.hash WHERE c.repo_url = r.repo_url),
       (SELECT COUNT(*) FROM method_change m JOIN file_change f ON f.file_change_id = m.file_change_id
          JOIN commits c ON c.hash = f.hash WHERE c.repo_url = r.repo_url)
FROM repository r
"""

# one row per (project, CVE) so a CVE fixed by two commits is averaged once
_PROJECT_CVES = """
SELECT DISTINCT fx.repo_url, cv.cve_id, cv.cvss2_base_score, cv.cvss3_base_score,
       cv.exploitability_score, cv.impact_score
FROM fixes fx JOIN cve cv ON cv.cve_id = fx.cve_id
"""


def _severity_means(db_path) -> dict[str, tuple]:
    scores: dict[str, list[list[float]]] = defaultdict(lambda: [[], [], [], []])
    for repo_url, _, *values in _rows(db_path, _PROJECT_CVES):
        for bucket, value in zip(scores[repo_url], values):
            if value is not None:
                bucket.append(value)
    return {url: tuple(_mean(b) for b in buckets) for url, buckets in scores.items()}


def top_projects(db_path: str | Path, by: str = "cves", n: int = 10) -> list[ProjectRow]:
    """Projects ranked by one count, descending; averages are over each project's CVEs."""
    if by not in RANK_KEYS:
        raise ValueError(f"by must be one of {RANK_KEYS}, got {by!r}")
    means = _severity_means(db_path)
    rows = []
    for repo_url, cves, commits, files, methods in _rows(db_path, _PROJECT_COUNTS):
        avg = means.get(repo_url, (None,) * 4)
        rows.append(ProjectRow(short_name(repo_url), repo_url, cves, commits, files, methods, *avg))
    rows.sort(key=lambda r: (-getattr(r, by), r.project, r.repo_url))
    return rows[:max(n, 0)]


# -- CWE distribution ----------------------------------------------------------------

@dataclass(frozen=True)
class CweRow:
    cwe_id: str
    description: str | None
    cve_count: int
    commit_count: int
    file_count: int


_CWE_COUNTS = """
SELECT cc.cwe_id, w.cwe_name,
       COUNT(DISTINCT cc.cve_id),
       COUNT(DISTINCT fx.hash),
       COUNT(DISTINCT f.file_change_id)
FROM cwe_classification cc
LEFT JOIN cwe w ON w.cwe_id = cc.cwe_id
LEFT JOIN fixes fx ON fx.cve_id = cc.cve_id
LEFT JOIN file_change f ON f.hash = fx.hash
GROUP BY cc.cwe_id
"""


def _cwe_order(cwe_id: str) -> tuple:
    head, _, tail = cwe_id.partition("-")
    if head == "CWE" and tail.isdigit():
        return (0, int(tail), "")
    return (1, 0, cwe_id)


def cwe_distribution(db_path: str | Path, n: int | None = None) -> list[CweRow]:
    """Per-weakness counts, most CVEs first; commit_count can exceed cve_count.

    Ties go to more commits, then more files, then the CWE number.
    """
    rows = [CweRow(*r) for r in _rows(db_path, _CWE_COUNTS)]
    rows.sort(key=lambda r: (-r.cve_count, -r.commit_count, -r.file_count, _cwe_order(r.cwe_id)))
    return rows if n is None else rows[:max(n, 0)]


# -- days to fix ---------------------------------------------------------------------

@dataclass(frozen=True)
class DaysRow:
    group: str
    repo_url: str | None
    fixes: int
    negative: int
    minimum: int | None
    maximum: int | None
    mean: float | None
    median: float | None
    q1: float | None
    q3: float | None


def days_between(published: str, committed: str) -> int:
    """Whole days from publication to fix, truncated toward zero; negative when the fix came first."""
    delta = parse_timestamp(committed) - parse_timestamp(published)
    return int(delta.total_seconds() / 86400)


_FIX_DATES = """
SELECT fx.repo_url, cv.published_date, c.committer_date
FROM fixes fx JOIN cve cv ON cv.cve_id = fx.cve_id JOIN commits c ON c.hash = fx.hash
"""


def fix_delays(db_path: str | Path) -> list[tuple[str, int]]:
    """(repo_url, days) for every fixes row."""
    return [(url, days_between(pub, committed)) for url, pub, committed in _rows(db_path, _FIX_DATES)]


def _stats(group: str, repo_url: str | None, days: list[int]) -> DaysRow:
    if not days:
        return DaysRow(group, repo_url, 0, 0, None, None, None, None, None, None)
    if len(days) > 1:
        q1, _, q3 = statistics.quantiles(days, n=4, method="inclusive")
    else:
        q1 = q3 = float(days[0])
    return DaysRow(group, repo_url, len(days), sum(d < 0 for d in days), min(days), max(days),
                   statistics.fmean(days), float(statistics.median(days)), q1, q3)


def days_to_fix(db_path: str | Path, group: str = "all") -> list[DaysRow]:
    """Delay statistics for all fixes together, or one row per project.

    Negative delays are kept; the ``negative`` column counts them.
    """
    delays = fix_delays(db_path)
    if group == "all":
        return [_stats("all", None, [d for _, d in delays])]
    if group not in ("project", "per-project"):
        raise ValueError(f"group must be 'all' or 'project', got {group!r}")
    per: dict[str, list[int]] = defaultdict(list)
    for url, d in delays:
        per[url].append(d)
    rows = [_stats(short_name(url), url, days) for url, days in per.items()]
    rows.sort(key=lambda r: (r.group, r.repo_url))
    return rows


# -- per-project aggregates ------------------------------------------------------------

@dataclass(frozen=True)
class SeverityRow:
    project: str
    repo_url: str
    cve_count: int
    avg_cvss2: float | None
    avg_cvss3: float | None
    avg_exploitability: float | None
    avg_impact: float | None


@dataclass(frozen=True)
class DmmRow:
    project: str
    repo_url: str
    commit_count: int
    dmm_unit_size: float | None
    dmm_unit_complexity: float | None
    dmm_unit_interfacing: float | None
    dmm_overall: float | None


_DMM = "SELECT repo_url, dmm_unit_size, dmm_unit_complexity, dmm_unit_interfacing FROM commits"


def per_project_aggregates(db_path: str | Path, which: str = "severity") -> list[SeverityRow] | list[DmmRow]:
    """Per-project means of severity scores, or of the three DMM metrics.

    The overall DMM score is the mean of whichever of the three per-project
    means exist; commits without a DMM value (no supported-language methods
    touched) are left out.
    """
    if which == "severity":
        counts: dict[str, int] = defaultdict(int)
        for repo_url, *_ in _rows(db_path, _PROJECT_CVES):
            counts[repo_url] += 1
        means = _severity_means(db_path)
        rows = [SeverityRow(short_name(url), url, counts[url], *means[url]) for url in counts]
    elif which == "dmm":
        per: dict[str, list[tuple]] = defaultdict(list)
        for repo_url, *scores in _rows(db_path, _DMM):
            per[repo_url].append(scores)
        rows = []
        for url, commits in per.items():
            metric_means = [_mean([c[i] for c in commits if c[i] is not None]) for i in range(3)]
            present = [m for m in metric_means if m is not None]
            overall = statistics.fmean(present) if present else None
            rows.append(DmmRow(short_name(url), url, len(commits), *metric_means, overall))
    else:
        raise ValueError(f"which must be 'severity' or 'dmm', got {which!r}")
    rows.sort(key=lambda r: (r.project, r.repo_url))
    return rows


# -- CSV output ----------------------------------------------------------------------

def write_csv(path: str | Path, rows: list, header: list[str] | None = None) -> Path:
    """Dataclass rows to CSV; None becomes an empty cell. ``header`` is needed only for empty tables."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if header is None:
        header = [f.name for f in fields(rows[0])] if rows else []
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            values = asdict(row)
            writer.writerow(["" if values[h] is None else values[h] for h in header])
    return path


def _header(cls) -> list[str]:
    return [f.name for f in fields(cls)]


def emit(db_path: str | Path, selection: str, out_dir: str | Path, by: str = "cves",
         n: int = 10) -> list[Path]:
    """Write the CSVs for ``selection`` (one report name or ``all``) and return their paths."""
    out_dir = Path(out_dir)
    emitters = {
        "summary": lambda: write_csv(out_dir / "summary.csv", summary(db_path), _header(SummaryRow)),
        "top_projects": lambda: write_csv(out_dir / "top_projects.csv", top_projects(db_path, by, n),
                                          _header(ProjectRow)),
        "cwe_distribution": lambda: write_csv(out_dir / "cwe_distribution.csv", cwe_distribution(db_path, n),
                                              _header(CweRow)),
        "days_to_fix": lambda: write_csv(out_dir / "days_to_fix.csv",
                                         days_to_fix(db_path, "all") + days_to_fix(db_path, "project"),
                                         _header(DaysRow)),
        "project_aggregates": lambda: _write_aggregates(db_path, out_dir / "project_aggregates.csv"),
    }
    if selection == "all":
        return [make() for make in emitters.values()]
    if selection not in emitters:
        raise ValueError(f"unknown report {selection!r}; choose from {', '.join(REPORTS)}")
    return [emitters[selection]()]


REPORTS = ("summary", "top_projects", "cwe_distribution", "days_to_fix", "project_aggregates", "all")


@dataclass(frozen=True)
class AggregateRow:
    project: str
    repo_url: str
    cve_count: int
    avg_cvss2: float | None
    avg_cvss3: float | None
    avg_exploitability: float | None
    avg_impact: float | None
    commit_count: int
    dmm_unit_size: float | None
    dmm_unit_complexity: float | None
    dmm_unit_interfacing: float | None
    dmm_overall: float | None


def _write_aggregates(db_path, path: Path) -> Path:
    """Severity and DMM means side by side, one line per project."""
    severity = {r.repo_url: r for r in per_project_aggregates(db_path, "severity")}
    dmm = {r.repo_url: r for r in per_project_aggregates(db_path, "dmm")}
    rows = []
    for url in sorted(set(severity) | set(dmm), key=lambda u: (short_name(u), u)):
        s, d = severity.get(url), dmm.get(url)
        sev = (s.cve_count, s.avg_cvss2, s.avg_cvss3, s.avg_exploitability, s.avg_impact) if s else (0,) + (None,) * 4
        dm = (d.commit_count, d.dmm_unit_size, d.dmm_unit_complexity, d.dmm_unit_interfacing,
              d.dmm_overall) if d else (0,) + (None,) * 4
        rows.append(AggregateRow(short_name(url), url, *sev, *dm))
    return write_csv(path, rows, _header(AggregateRow))
