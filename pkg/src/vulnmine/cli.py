"""Command-line entry point.

Exit status: 0 on success, 2 when a collection finished but skipped
repositories or feeds, 1 on a fatal error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import signal
import sqlite3
import sys
import threading
from pathlib import Path

from vulnmine import analytics, storage
from vulnmine.config import Config, ConfigError, load_config
from vulnmine.feeds import FeedError
from vulnmine.pipeline import run_collect

logger = logging.getLogger("vulnmine")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class Fatal(Exception):
    pass


def _config_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with a [vulnmine] section (default .vulnmine.ini)")
    common.add_argument("--database-path", dest="database_path", type=Path)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _config_flags()
    parser = argparse.ArgumentParser(prog="vulnmine", description="Mine vulnerability fix commits referenced by NVD CVEs.")
    sub = parser.add_subparsers(dest="command", required=True)

    collect = sub.add_parser("collect", parents=[common], help="build or refresh the database")
    collect.add_argument("--sample-limit", dest="sample_limit", type=int, help="stop after this many commits (0 = all)")
    collect.add_argument("--github-username", dest="github_username")
    collect.add_argument("--github-token", dest="github_token")
    collect.add_argument("--gitlab-token", dest="gitlab_token")
    collect.add_argument("--bitbucket-username", dest="bitbucket_username")
    collect.add_argument("--bitbucket-token", dest="bitbucket_token")
    collect.add_argument("--cache-dir", dest="cache_dir", type=Path)
    collect.add_argument("--workdir", type=Path)
    collect.add_argument("--worker-count", dest="worker_count", type=int)
    collect.add_argument("--http-cache-dir", dest="http_cache_dir", type=Path)
    collect.add_argument("--offline", action="store_true", default=None,
                         help="answer HTTP only from recorded responses and cached feeds")
    collect.add_argument("--first-year", dest="first_year", type=int)
    collect.add_argument("--last-year", dest="last_year", type=int)
    collect.add_argument("--cwe-source", dest="cwe_source", type=Path, help="CWE catalog CSV or XML export")
    collect.add_argument("--keep-clones", dest="keep_clones", action="store_true", default=None)

    report = sub.add_parser("report", parents=[common], help="write analytics CSVs")
    report.add_argument("--selection", choices=analytics.REPORTS, default="all")
    report.add_argument("--out", type=Path, default=Path("reports"), help="output directory")
    report.add_argument("--by", choices=analytics.RANK_KEYS, default="cves", help="ranking for top_projects")
    report.add_argument("-n", type=int, default=10, help="rows for top_projects and cwe_distribution")

    dump = sub.add_parser("export-dump", parents=[common], help="write the database as SQL text")
    dump.add_argument("--output", type=Path, help="file to write; .gz compresses (default stdout)")

    query = sub.add_parser("query", parents=[common], help="run one read-only SQL statement")
    query.add_argument("sql")
    query.add_argument("--no-header", action="store_true")
    return parser


_CONFIG_KEYS = {"database_path", "sample_limit", "github_username", "github_token", "gitlab_token",
                "bitbucket_username", "bitbucket_token", "cache_dir", "workdir", "worker_count",
                "http_cache_dir", "offline", "first_year", "last_year", "cwe_source", "keep_clones"}


def _load(args) -> Config:
    overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_KEYS}
    return load_config(args.config, overrides=overrides)


def _require_database(config: Config) -> Path:
    path = Path(config.database_path)
    if not path.is_file():
        raise Fatal(f"database not found at {path}; set database_path in the config file or pass "
                    f"--database-path, and run 'vulnmine collect' first")
    return path


def cmd_collect(args, config: Config) -> int:
    stop = threading.Event()

    def on_signal(signum, frame):
        if stop.is_set():
            raise KeyboardInterrupt
        logger.warning("stopping after in-flight repositories (signal again to abort)")
        stop.set()

    previous = {}
    if threading.current_thread() is threading.main_thread():
        for sig in (signal.SIGINT, signal.SIGTERM):
            previous[sig] = signal.signal(sig, on_signal)
    try:
        report = run_collect(config, stop=stop)
    finally:
        for sig, handler in previous.items():
            signal.signal(sig, handler)
    for line in report.lines():
        print(line)
    return EXIT_PARTIAL if report.partial else EXIT_OK


def cmd_report(args, config: Config) -> int:
    db = _require_database(config)
    for path in analytics.emit(db, args.selection, args.out, by=args.by, n=args.n):
        print(path)
    return EXIT_OK


def cmd_export_dump(args, config: Config) -> int:
    db = _require_database(config)
    text = storage.export_dump(db, args.output)
    if args.output is None:
        sys.stdout.write(text)
    else:
        print(args.output)
    return EXIT_OK


def cmd_query(args, config: Config) -> int:
    db = _require_database(config)
    columns, rows = storage.run_query(db, args.sql)
    writer = csv.writer(sys.stdout)
    if not args.no_header and columns:
        writer.writerow(columns)
    writer.writerows(rows)
    return EXIT_OK


COMMANDS = {"collect": cmd_collect, "report": cmd_report, "export-dump": cmd_export_dump, "query": cmd_query}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose > 1 else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = _load(args)
        return COMMANDS[args.command](args, config)
    except (Fatal, ConfigError, FeedError) as exc:
        print(f"vulnmine: error: {exc}", file=sys.stderr)
    except sqlite3.Error as exc:
        print(f"vulnmine: SQL error: {exc}", file=sys.stderr)
    except KeyboardInterrupt:
        print("vulnmine: aborted", file=sys.stderr)
    except OSError as exc:
        print(f"vulnmine: I/O error: {exc}", file=sys.stderr)
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
