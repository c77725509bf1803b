import os

import pytest

from fixture_world import build_world


def pytest_collection_modifyitems(config, items):
    if os.environ.get("VULNMINE_LIVE") == "1":
        return
    skip = pytest.mark.skip(reason="live network test; set VULNMINE_LIVE=1 to run")
    for item in items:
        if "live" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def world(tmp_path_factory):
    return build_world(tmp_path_factory.mktemp("world"))


@pytest.fixture
def git_urls(world, monkeypatch):
    """Route forge clone URLs to the fixture repositories for this test."""
    for key, value in world.git_env().items():
        monkeypatch.setenv(key, value)
    return world


@pytest.fixture(scope="session")
def collected(world, tmp_path_factory):
    """One offline collection over the fixture world, shared by read-only tests."""
    from vulnmine.config import load_config
    from vulnmine.pipeline import run_collect

    with pytest.MonkeyPatch.context() as mp:
        for key, value in world.git_env().items():
            mp.setenv(key, value)
        config = load_config(world.write_config(tmp_path_factory.mktemp("cfg") / "vulnmine.ini"), env={})
        report = run_collect(config)
    return config, report


_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if not item.name.startswith("test_criterion_"):
        return
    number = int(item.name.split("_")[2])
    title = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if report.skipped:
        _CRITERIA[number] = ("SKIP", title)
    elif report.failed:
        _CRITERIA[number] = ("FAIL", title)
    elif report.when == "call":
        _CRITERIA.setdefault(number, ("PASS", title))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {title}")
