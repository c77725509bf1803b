import gzip
import sqlite3
from dataclasses import replace

import pytest

import fixture_world as fw
from batchkit import parser_batch
from vulnmine import storage
from vulnmine.storage import Batch, BatchRejected, Store


@pytest.fixture
def batch(world):
    return parser_batch(world)


def test_persist_reports_new_rows(tmp_path, batch):
    with Store(tmp_path / "db.sqlite") as store:
        added = store.persist(batch)
    assert added["cve"] == 1 and added["fixes"] == 1 and added["commits"] == 1
    assert added["file_change"] == 2 and added["method_change"] == len(batch.methods) == 2
    assert added["cwe"] == len(batch.cwes)


def test_same_batch_twice_is_idempotent(tmp_path, batch):
    with Store(tmp_path / "db.sqlite") as store:
        store.persist(batch)
        first = store.counts()
        again = store.persist(batch)
        assert store.counts() == first
    assert set(again.values()) == {0}


def test_upsert_updates_non_key_columns(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    with Store(path) as store:
        store.persist(batch)
        newer = replace(batch.repositories[0], stars_count=121)
        store.persist(Batch(repositories=[newer]))
    _, rows = storage.run_query(path, "SELECT stars_count FROM repository")
    assert rows == [(121,)]


def test_unknown_file_change_rolls_back(tmp_path, batch):
    bad = replace(batch.methods[0], method_change_id="0" * 32, file_change_id="f" * 32)
    broken = replace(batch, methods=batch.methods + [bad])
    with Store(tmp_path / "db.sqlite") as store:
        with pytest.raises(BatchRejected):
            store.persist(broken)
        assert set(store.counts().values()) == {0}
        # the connection stays usable for the next repository's batch
        store.persist(batch)
        assert store.counts()["method_change"] == 2


def test_check_constraint_rolls_back(tmp_path, batch):
    bad = replace(batch.methods[0], start_line=9, end_line=3)
    with Store(tmp_path / "db.sqlite") as store:
        with pytest.raises(BatchRejected):
            store.persist(replace(batch, methods=[bad]))
        assert store.counts()["cve"] == 0


def test_booleans_and_json_columns(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    storage.persist(path, batch)
    _, rows = storage.run_query(path, "SELECT name FROM method_change WHERE before_change = True")
    assert rows == [("parse_header",)]
    _, rows = storage.run_query(path, "SELECT diff_parsed FROM file_change WHERE filename = 'parse.c'")
    assert rows[0][0] == ('{"added":[[11,"    int n = clamp(len, 64);"]],'
                          '"deleted":[[11,"    int n = len;"]]}')
    _, rows = storage.run_query(path, "SELECT code_after FROM file_change WHERE filename = 'parse.c'")
    assert rows[0][0] == fw.PARSE_C_V1


def test_empty_database_dump_is_schema_only(tmp_path):
    path = tmp_path / "empty.sqlite"
    Store(path).close()
    text = storage.export_dump(path)
    assert text.startswith(storage.DUMP_HEADER)
    assert "INSERT" not in text
    assert text.count("CREATE TABLE") == len(storage.TABLES)


def test_query_on_empty_database(tmp_path):
    path = tmp_path / "empty.sqlite"
    Store(path).close()
    columns, rows = storage.run_query(path, "SELECT cve_id FROM cve")
    assert columns == ["cve_id"] and rows == []


def test_sql_error_surfaces_verbatim(tmp_path):
    path = tmp_path / "empty.sqlite"
    Store(path).close()
    with pytest.raises(sqlite3.OperationalError, match="no such table: nope"):
        storage.run_query(path, "SELECT * FROM nope")


def test_run_query_is_read_only(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    storage.persist(path, batch)
    with pytest.raises(sqlite3.OperationalError):
        storage.run_query(path, "DELETE FROM method_change")


def test_dump_fixpoint_plain_and_gzip(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    storage.persist(path, batch)
    first = storage.export_dump(path, tmp_path / "dump.sql.gz")
    assert gzip.decompress((tmp_path / "dump.sql.gz").read_bytes()).decode() == first
    storage.load_dump(storage.read_dump(tmp_path / "dump.sql.gz"), tmp_path / "copy.sqlite")
    second = storage.export_dump(tmp_path / "copy.sqlite", tmp_path / "again.sql")
    assert first == second
    assert storage.read_dump(tmp_path / "again.sql") == first
    assert storage.check_integrity(tmp_path / "copy.sqlite") == []


def test_load_refuses_existing_file(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    storage.persist(path, batch)
    with pytest.raises(FileExistsError):
        storage.load_dump(storage.export_dump(path), path)


def test_integrity_clean_after_batch(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    storage.persist(path, batch)
    assert storage.check_integrity(path) == []


def test_integrity_reports_reverse_orphans(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    storage.persist(path, replace(batch, fixes=[], classifications=[]))
    problems = storage.check_integrity(path)
    assert any(p.startswith("cve without fixes") for p in problems)
    assert any(p.startswith("commit without fixes") for p in problems)
    assert any(p.startswith("cve without classification") for p in problems)


def test_integrity_reports_dangling_rows(tmp_path, batch):
    path = tmp_path / "db.sqlite"
    storage.persist(path, batch)
    with sqlite3.connect(path) as conn:  # foreign keys are off by default here
        conn.execute("DELETE FROM file_change WHERE filename = 'logo.png'")
        conn.execute("DELETE FROM file_change WHERE filename = 'parse.c'")
    problems = storage.check_integrity(path)
    assert any("method_change" in p and "file_change" in p for p in problems)
