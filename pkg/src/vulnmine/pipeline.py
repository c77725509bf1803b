"""End-to-end collection: feeds, references, forge metadata, git extraction, storage.

Repositories are processed by a thread pool. Each worker returns one Batch
per repository and the calling thread, the only writer, persists them in
submission order, so a run is deterministic whatever the worker count.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import Counter
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import requests

from vulnmine import feeds
from vulnmine.changes import DiffParseError, ExtractedCommit, extract
from vulnmine.config import Config
from vulnmine.cwe import assign, load_catalog
from vulnmine.feeds import CveRecord
from vulnmine.forges import Clock, ForgeError, MetaFetcher, RepoUnavailable
from vulnmine.gitrepo import CommitNotFound, GitError, clone_repo
from vulnmine.http import ReplaySession
from vulnmine.references import FixReference, classify, dedupe, resolve
from vulnmine.storage import TABLES, Batch, BatchRejected, FixRow, Store

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DroppedReference:
    cve_id: str
    repo_url: str
    commit_hash: str
    reason: str


@dataclass
class RunReport:
    new_rows: dict[str, int] = field(default_factory=lambda: dict.fromkeys(TABLES, 0))
    commits_persisted: int = 0
    repositories_persisted: int = 0
    cves_in_feeds: int = 0
    cves_rejected: int = 0
    item_errors: int = 0
    field_conflicts: int = 0
    candidate_cves: int = 0
    reference_kinds: Counter = field(default_factory=Counter)
    fix_references: int = 0
    feed_failures: dict[int, str] = field(default_factory=dict)
    skipped_repositories: dict[str, str] = field(default_factory=dict)
    dropped_references: list[DroppedReference] = field(default_factory=list)
    sample_limit_reached: bool = False
    interrupted: bool = False
    elapsed_seconds: float = 0.0

    @property
    def partial(self) -> bool:
        return bool(self.skipped_repositories or self.feed_failures or self.interrupted)

    def lines(self) -> list[str]:
        out = [f"elapsed: {self.elapsed_seconds:.1f}s",
               f"CVEs in feeds: {self.cves_in_feeds} (rejected {self.cves_rejected}, "
               f"unparseable {self.item_errors}, field conflicts {self.field_conflicts})",
               f"CVEs with fix references: {self.candidate_cves}",
               f"fix references: {self.fix_references}",
               "reference kinds: " + ", ".join(f"{k}={v}" for k, v in sorted(self.reference_kinds.items())),
               f"repositories persisted: {self.repositories_persisted}",
               f"commits persisted: {self.commits_persisted}",
               "new rows: " + ", ".join(f"{t}={self.new_rows[t]}" for t in TABLES)]
        for year, reason in sorted(self.feed_failures.items()):
            out.append(f"feed {year} failed: {reason}")
        for url, reason in sorted(self.skipped_repositories.items()):
            out.append(f"skipped repository {url}: {reason}")
        for d in self.dropped_references:
            out.append(f"dropped reference {d.cve_id} {d.repo_url} {d.commit_hash}: {d.reason}")
        if self.sample_limit_reached:
            out.append("stopped at sample_limit")
        if self.interrupted:
            out.append("interrupted; in-flight repositories were finished")
        return out


@dataclass
class RepoOutcome:
    """What one worker produced for one repository."""

    repo_url: str
    batch: Batch | None = None
    skipped: str | None = None
    dropped: list[DroppedReference] = field(default_factory=list)


def make_session(config: Config):
    if config.http_cache_dir is None:
        if config.offline:
            return ReplaySession(config.cache_dir / "http")
        return requests.Session()
    upstream = None if config.offline else requests.Session()
    return ReplaySession(config.http_cache_dir, upstream)


def collect_references(records: list[CveRecord], report: RunReport) -> list[FixReference]:
    refs: list[FixReference] = []
    for record in records:
        for entry in record.references:
            ref = resolve(entry.url, record.cve_id)
            if ref is not None:
                refs.append(ref)
    refs = dedupe(refs)
    report.fix_references = len(refs)
    return refs


def group_by_repository(refs: list[FixReference]) -> dict[str, list[FixReference]]:
    groups: dict[str, list[FixReference]] = {}
    for ref in refs:
        groups.setdefault(ref.repo_url, []).append(ref)
    return groups


def process_repository(repo_url: str, refs: list[FixReference], cves: dict[str, CveRecord],
                       fetcher: MetaFetcher, config: Config) -> RepoOutcome:
    """Metadata, clone and extraction for one repository; never raises for per-repository trouble."""
    outcome = RepoOutcome(repo_url)
    try:
        meta = fetcher.fetch_meta(refs[0])
    except ForgeError as exc:
        outcome.skipped = f"metadata: {exc}"
        logger.warning("skipping %s: %s", repo_url, outcome.skipped)
        return outcome
    try:
        repo = clone_repo(repo_url, config.workdir)
    except RepoUnavailable as exc:
        outcome.skipped = f"clone: {exc.reason}"
        logger.warning("skipping %s: %s", repo_url, outcome.skipped)
        return outcome

    extracted: dict[str, ExtractedCommit] = {}
    fixes: list[FixRow] = []
    try:
        for ref in refs:
            try:
                full = repo.expand(ref.commit_hash)
                if full not in extracted:
                    extracted[full] = extract(repo, full)
            except CommitNotFound:
                outcome.dropped.append(DroppedReference(ref.cve_id, repo_url, ref.commit_hash, "commit not found"))
                continue
            except (GitError, DiffParseError) as exc:
                outcome.dropped.append(DroppedReference(ref.cve_id, repo_url, ref.commit_hash, str(exc)))
                continue
            row = FixRow(ref.cve_id, full, repo_url)
            if row not in fixes:
                fixes.append(row)
    finally:
        if not config.keep_clones:
            repo.cleanup()

    if not fixes:
        outcome.skipped = "no usable fix commits"
        return outcome
    cve_ids = list(dict.fromkeys(f.cve_id for f in fixes))
    outcome.batch = Batch(
        cves=[cves[c] for c in cve_ids],
        classifications=[a for c in cve_ids for a in assign(cves[c])],
        repositories=[meta],
        commits=[e.commit for e in extracted.values()],
        fixes=fixes,
        files=[f for e in extracted.values() for f in e.files],
        methods=[m for e in extracted.values() for m in e.methods],
    )
    return outcome


def limit_batch(batch: Batch, budget: int) -> Batch:
    """Keep only the first ``budget`` commits and whatever hangs off them."""
    keep = {c.hash for c in batch.commits[:budget]}
    fixes = [f for f in batch.fixes if f.hash in keep]
    cve_ids = {f.cve_id for f in fixes}
    files = [f for f in batch.files if f.hash in keep]
    file_ids = {f.file_change_id for f in files}
    return replace(
        batch,
        cves=[c for c in batch.cves if c.cve_id in cve_ids],
        classifications=[a for a in batch.classifications if a.cve_id in cve_ids],
        commits=[c for c in batch.commits if c.hash in keep],
        fixes=fixes,
        files=files,
        methods=[m for m in batch.methods if m.file_change_id in file_ids],
    )


def reconcile_shared_commits(store: Store, batch: Batch) -> Batch:
    """A commit already stored under another repository (a fork) is recorded only as a fix.

    Commits are keyed by hash alone, so the first repository to persist a
    hash owns it; later repositories contribute their fixes rows pointing at
    the owner.
    """
    owners = {}
    for commit in batch.commits:
        row = store.conn.execute("SELECT repo_url FROM commits WHERE hash = ?", (commit.hash,)).fetchone()
        if row and row[0] != commit.repo_url:
            owners[commit.hash] = row[0]
    if not owners:
        return batch
    commits = [c for c in batch.commits if c.hash not in owners]
    files = [f for f in batch.files if f.hash not in owners]
    file_ids = {f.file_change_id for f in files}
    return replace(
        batch,
        repositories=batch.repositories if commits else [],
        commits=commits,
        fixes=[replace(f, repo_url=owners.get(f.hash, f.repo_url)) for f in batch.fixes],
        files=files,
        methods=[m for m in batch.methods if m.file_change_id in file_ids],
    )


def load_cves(config: Config, session, report: RunReport) -> list[CveRecord]:
    outcome = feeds.fetch_feeds(config.years, config.cache_dir, session,
                                check_updates=not config.offline, workers=config.worker_count)
    report.feed_failures.update(outcome.failures)
    records: list[CveRecord] = []
    for doc in outcome.documents:
        parsed = feeds.parse_feed(doc.data, doc.year)
        report.cves_rejected += parsed.rejected
        report.item_errors += len(parsed.errors)
        report.field_conflicts += parsed.conflicts
        records.extend(parsed.records)
    report.cves_in_feeds = len(records) + report.cves_rejected + report.item_errors
    for record in records:
        for entry in record.references:
            report.reference_kinds[classify(entry.url)] += 1
    return feeds.filter_fix_referencing(records)


def run_collect(config: Config, session=None, clock: Clock | None = None,
                stop: threading.Event | None = None) -> RunReport:
    """Collect into ``config.database_path`` and report what happened.

    Feed download failures (FeedFetchError) abort the run. Problems confined
    to one repository are logged, listed in the report and skipped.
    """
    started = time.monotonic()
    report = RunReport()
    session = session or make_session(config)
    stop = stop or threading.Event()

    candidates = load_cves(config, session, report)
    report.candidate_cves = len(candidates)
    cves = {c.cve_id: c for c in candidates}
    refs = collect_references(candidates, report)
    groups = group_by_repository(refs)
    logger.info("%d fix references across %d repositories", len(refs), len(groups))

    used = {a.cwe_id for c in candidates for a in assign(c)}
    catalog = load_catalog(config.cwe_source, sorted(used))
    fetcher = MetaFetcher(session, config.credentials(), clock, config.max_retries)

    with Store(config.database_path) as store:
        _accumulate(report, store.persist(Batch(cwes=list(catalog))))
        with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
            futures: list[tuple[str, Future]] = [
                (url, pool.submit(process_repository, url, group, cves, fetcher, config))
                for url, group in groups.items()
            ]
            for url, future in futures:
                if future.cancelled():
                    continue
                if stop.is_set() and not report.interrupted:
                    report.interrupted = True
                    for _, pending in futures:
                        pending.cancel()
                    if future.cancelled():
                        continue
                _write(store, config, report, future.result())
                if report.sample_limit_reached:
                    for _, pending in futures:
                        pending.cancel()
                    break
    report.elapsed_seconds = time.monotonic() - started
    return report


def _accumulate(report: RunReport, added: dict[str, int]) -> None:
    for table, n in added.items():
        report.new_rows[table] += n


def _write(store: Store, config: Config, report: RunReport, outcome: RepoOutcome) -> None:
    report.dropped_references.extend(outcome.dropped)
    if outcome.batch is None:
        report.skipped_repositories[outcome.repo_url] = outcome.skipped or "unknown"
        return
    batch = reconcile_shared_commits(store, outcome.batch)
    if config.sample_limit:
        budget = config.sample_limit - report.commits_persisted
        if len(batch.commits) >= budget:
            batch = limit_batch(batch, budget)
            report.sample_limit_reached = True
    try:
        _accumulate(report, store.persist(batch))
    except BatchRejected as exc:
        logger.error("batch for %s rejected: %s", outcome.repo_url, exc)
        report.skipped_repositories[outcome.repo_url] = f"rejected by storage: {exc}"
        return
    report.commits_persisted += len(batch.commits)
    report.repositories_persisted += 1
    logger.info("persisted %s (%d commits)", outcome.repo_url, len(batch.commits))
