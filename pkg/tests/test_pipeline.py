import threading
from dataclasses import replace

import pytest

import fixture_world as fw
from batchkit import parser_batch
from vulnmine import storage
from vulnmine.config import load_config
from vulnmine.feeds import FeedFetchError
from vulnmine.pipeline import limit_batch, reconcile_shared_commits, run_collect
from vulnmine.storage import Store

EXPECTED = {"cve": 7, "cwe": 95, "cwe_classification": 7, "repository": 3, "commits": 7,
            "fixes": 8, "file_change": 10, "method_change": 11}


def fresh_config(world, tmp_path, **extra):
    tmp_path.mkdir(parents=True, exist_ok=True)
    return load_config(world.write_config(tmp_path / "vulnmine.ini", **extra), env={},
                       overrides={"database_path": tmp_path / "db.sqlite", "workdir": tmp_path / "work",
                                  "cache_dir": tmp_path / "cache"})


def test_report_of_full_run(collected):
    config, report = collected
    assert report.new_rows == EXPECTED
    assert report.commits_persisted == 7 and report.repositories_persisted == 3
    assert report.candidate_cves == 8
    assert report.cves_rejected == 1
    assert report.reference_kinds == {"commit": 10, "other": 2, "pull": 1}
    assert list(report.skipped_repositories) == [fw.REPO_URLS["vanished"]]
    assert [(d.cve_id, d.commit_hash) for d in report.dropped_references] == [("CVE-2020-1001", "f" * 40)]
    assert report.partial and not report.sample_limit_reached


def test_fixes_resolve_abbreviated_hash(collected, world):
    config, _ = collected
    _, rows = storage.run_query(config.database_path, "SELECT cve_id FROM fixes WHERE hash = ? ORDER BY cve_id",
                                (world.commits["A2"],))
    assert rows == [("CVE-2020-1002",), ("CVE-2020-1003",)]


def test_unknown_cwe_label_stored_as_noinfo(collected):
    config, _ = collected
    _, rows = storage.run_query(config.database_path,
                                "SELECT cwe_id FROM cwe_classification WHERE cve_id = 'CVE-2019-3002'")
    assert rows == [("NVD-CWE-noinfo",)]


def test_rerun_adds_nothing(git_urls, tmp_path):
    config = fresh_config(git_urls, tmp_path)
    first = run_collect(config)
    dump = storage.export_dump(config.database_path)
    second = run_collect(config)
    assert set(second.new_rows.values()) == {0}
    assert storage.export_dump(config.database_path) == dump
    assert first.commits_persisted == second.commits_persisted == 7


def test_worker_count_does_not_change_result(git_urls, tmp_path):
    one = fresh_config(git_urls, tmp_path / "one", worker_count=1)
    many = fresh_config(git_urls, tmp_path / "many", worker_count=4)
    run_collect(one)
    run_collect(many)
    assert storage.export_dump(one.database_path) == storage.export_dump(many.database_path)


@pytest.mark.parametrize("limit", [1, 2, 3, 6])
def test_sample_limit(git_urls, tmp_path, limit):
    config = fresh_config(git_urls, tmp_path, sample_limit=limit)
    report = run_collect(config)
    assert report.commits_persisted == limit
    assert report.sample_limit_reached
    with Store(config.database_path) as store:
        assert store.counts()["commits"] == limit
    assert storage.check_integrity(config.database_path) == []


def test_clone_failure_skips_only_that_repository(git_urls, tmp_path, monkeypatch):
    index = list(fw.REPO_URLS).index("tool")
    monkeypatch.setenv(f"GIT_CONFIG_KEY_{index}", f"url.{(tmp_path / 'gone').as_posix()}.insteadOf")
    config = fresh_config(git_urls, tmp_path)
    report = run_collect(config)
    assert report.skipped_repositories[fw.REPO_URLS["tool"]].startswith("clone:")
    assert report.commits_persisted == 5
    assert storage.check_integrity(config.database_path) == []


def test_stop_before_start_finishes_cleanly(git_urls, tmp_path):
    config = fresh_config(git_urls, tmp_path, worker_count=1)
    stop = threading.Event()
    stop.set()
    report = run_collect(config, stop=stop)
    assert report.interrupted and report.partial
    assert report.repositories_persisted <= 1
    assert storage.check_integrity(config.database_path) == []


def test_missing_feeds_are_fatal(world, tmp_path):
    config = load_config(overrides={"database_path": tmp_path / "db.sqlite", "cache_dir": tmp_path / "cache",
                                    "workdir": tmp_path / "work", "http_cache_dir": tmp_path / "nothing",
                                    "offline": True, "first_year": 2020, "last_year": 2020}, env={})
    with pytest.raises(FeedFetchError):
        run_collect(config)


def test_cached_feeds_survive_offline_rerun(git_urls, tmp_path):
    config = fresh_config(git_urls, tmp_path)
    run_collect(config)
    # no recorded HTTP at all now: feeds come from the cache, metadata fails
    offline = replace(config, http_cache_dir=tmp_path / "empty-http")
    report = run_collect(offline)
    assert report.candidate_cves == 8
    assert len(report.skipped_repositories) == 4


def test_limit_batch_keeps_dependents(world):
    batch = parser_batch(world)
    cut = limit_batch(batch, 0)
    assert cut.commits == [] and cut.files == [] and cut.methods == [] and cut.cves == []
    assert limit_batch(batch, 1) == batch


def test_shared_commit_is_recorded_as_fix_only(world, tmp_path):
    batch = parser_batch(world)
    fork = "https://github.com/someone/parser"
    with Store(tmp_path / "db.sqlite") as store:
        store.persist(batch)
        forked = replace(
            batch,
            repositories=[replace(batch.repositories[0], repo_url=fork)],
            commits=[replace(c, repo_url=fork) for c in batch.commits],
            fixes=[replace(f, repo_url=fork) for f in batch.fixes],
        )
        reconciled = reconcile_shared_commits(store, forked)
        assert reconciled.commits == [] and reconciled.repositories == []
        assert {f.repo_url for f in reconciled.fixes} == {fw.REPO_URLS["parser"]}
        store.persist(reconciled)
        assert store.counts()["repository"] == 1
    assert storage.check_integrity(tmp_path / "db.sqlite") == []
