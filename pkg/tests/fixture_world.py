"""A small offline world: three git repositories, NVD feeds and forge API answers.

Layout of the fix commits (hand-enumerated expectations live in the tests):

  github.com/acme/parser   C, Python, Markdown, one binary
    A1  fix CVE-2020-1001   parse.c one-line change + logo.png binary change
    A2  fix CVE-2020-1002 and CVE-2020-1003 (same commit)   check.py +2, README +1/-1
    A4  fix CVE-2020-1004   merge; parse.c changed only on the second parent
  gitlab.com/beta/webapp   JavaScript, PHP
    B1  fix CVE-2021-2001   app.js one-line change + pure rename
    B2  fix CVE-2021-2001   index.php one-line change
  bitbucket.org/gamma/tool Go
    C0  fix CVE-2019-3001   root commit adding main.go
    C1  fix CVE-2019-3002   main.go +3
  github.com/ghost/vanished  unavailable (clone and API fail), CVE-2020-1005
"""

from __future__ import annotations

import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from forgekit import bitbucket_forks, bitbucket_repo, github_repo, gitlab_project, ok
from nvdkit import gz_feed, make_feed, make_item, meta_text
from vulnmine import feeds
from vulnmine.http import StoredResponse, save_response

PARSE_C_V0 = """/* Header parser for the acme wire format. */
#include <string.h>

static int clamp(int v, int hi)
{
    return v > hi ? hi : v;
}

int parse_header(const char *buf, int len, char *out)
{
    int n = len;
    if (buf == NULL)
        return -1;
    memcpy(out, buf, n);
    return n;
}
"""
PARSE_C_V1 = PARSE_C_V0.replace("    int n = len;\n", "    int n = clamp(len, 64);\n")
PARSE_C_V2 = PARSE_C_V1.replace("        return -1;\n", "        return -1;\n    if (n < 0)\n        return -1;\n")

CHECK_PY_V0 = '''"""Input checks."""


def validate(name):
    if not name:
        return False
    return True


def banner():
    return "check"
'''
CHECK_PY_V1 = CHECK_PY_V0.replace(
    "        return False\n    return True\n",
    "        return False\n    if \"<\" in name or \">\" in name:\n        return False\n    return True\n")
CHECK_PY_V2 = CHECK_PY_V1.replace('return "check"', 'return "check v2"')

README_V0 = "# parser\n\nFast header parsing.\nSee docs for details."
README_V1 = "# parser\n\nFast header parsing.\nInputs are now validated."

LOGO_V0 = bytes([0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0, 0, 0, 13]) + bytes(range(64))
LOGO_V1 = LOGO_V0 + bytes([0, 1, 2, 3, 255, 254])

APP_JS_V0 = """// Rendering helpers
function escape(s) {
  return s.replace(/</g, '&lt;');
}

function render(user) {
  return '<b>' + user.name + '</b>';
}

module.exports = { render, escape };
"""
APP_JS_V1 = APP_JS_V0.replace("'<b>' + user.name + '</b>'", "'<b>' + escape(user.name) + '</b>'")
OLD_NAME_JS = "exports.answer = 42;\n"

INDEX_PHP_V0 = """<?php
function greet($name) {
    echo "Hello " . $name;
}
"""
INDEX_PHP_V1 = INDEX_PHP_V0.replace('"Hello " . $name', '"Hello " . htmlspecialchars($name)')

MAIN_GO_V0 = """package main

import "fmt"

func main() {
\tfmt.Println(sum(2, 3))
}

func sum(a int, b int) int {
\treturn a + b
}
"""
MAIN_GO_V1 = MAIN_GO_V0.replace(
    "func sum(a int, b int) int {\n",
    "func sum(a int, b int) int {\n\tif a > 1000 || b > 1000 {\n\t\treturn 0\n\t}\n")

REPO_URLS = {
    "parser": "https://github.com/acme/parser",
    "webapp": "https://gitlab.com/beta/webapp",
    "tool": "https://bitbucket.org/gamma/tool",
    "vanished": "https://github.com/ghost/vanished",
}

# (vector, score, severity, exploitability, impact)
V2 = {
    "CVE-2019-3001": ("AV:N/AC:L/Au:N/C:P/I:P/A:P", 7.5, "HIGH", 10.0, 6.4),
    "CVE-2019-3002": ("AV:L/AC:L/Au:N/C:N/I:N/A:P", 2.1, "LOW", 3.9, 2.9),
    "CVE-2020-1001": ("AV:N/AC:M/Au:N/C:P/I:P/A:P", 6.8, "MEDIUM", 8.6, 6.4),
    "CVE-2020-1002": ("AV:N/AC:M/Au:N/C:N/I:P/A:N", 4.3, "MEDIUM", 8.6, 2.9),
    "CVE-2020-1003": ("AV:N/AC:L/Au:N/C:N/I:N/A:P", 5.0, "MEDIUM", 10.0, 2.9),
    "CVE-2020-1004": ("AV:N/AC:L/Au:N/C:C/I:C/A:C", 10.0, "HIGH", 10.0, 10.0),
    "CVE-2020-1005": ("AV:N/AC:L/Au:N/C:P/I:N/A:N", 5.0, "MEDIUM", 10.0, 2.9),
    "CVE-2021-2001": ("AV:N/AC:M/Au:N/C:N/I:P/A:N", 4.3, "MEDIUM", 8.6, 2.9),
}
V3 = {
    "CVE-2019-3001": ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H", 9.8, "CRITICAL", 3.9, 5.9),
    "CVE-2019-3002": ("CVSS:3.1/AV:L/AC:L/PR:L/UI:N/S:U/C:N/I:N/A:H", 5.5, "MEDIUM", 1.8, 3.6),
    "CVE-2020-1001": ("CVSS:3.1/AV:N/AC:H/PR:N/UI:N/S:U/C:H/I:H/A:H", 8.1, "HIGH", 2.2, 5.9),
    "CVE-2020-1002": ("CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N", 6.1, "MEDIUM", 2.8, 2.7),
    "CVE-2020-1003": ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H", 7.5, "HIGH", 3.9, 3.6),
    "CVE-2020-1004": ("CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H", 9.8, "CRITICAL", 3.9, 5.9),
    "CVE-2020-1005": ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:N/A:N", 7.5, "HIGH", 3.9, 3.6),
}

_AUTHOR = {"GIT_AUTHOR_NAME": "Dana Maintainer", "GIT_AUTHOR_EMAIL": "dana@example.org",
           "GIT_COMMITTER_NAME": "Dana Maintainer", "GIT_COMMITTER_EMAIL": "dana@example.org"}


@dataclass
class World:
    root: Path
    repos: dict[str, Path] = field(default_factory=dict)
    commits: dict[str, str] = field(default_factory=dict)
    http_dir: Path | None = None
    cache_dir: Path | None = None
    workdir: Path | None = None
    database: Path | None = None

    def git_env(self) -> dict[str, str]:
        """insteadOf rewrites that send forge clone URLs to the local fixture repos."""
        env = {"GIT_CONFIG_COUNT": str(len(REPO_URLS))}
        for i, (name, url) in enumerate(REPO_URLS.items()):
            target = self.repos.get(name, self.root / "missing" / name)
            env[f"GIT_CONFIG_KEY_{i}"] = f"url.{target.as_posix()}.insteadOf"
            env[f"GIT_CONFIG_VALUE_{i}"] = url
        return env

    def write_config(self, path: Path, **extra) -> Path:
        """INI for an offline run over this world; keyword arguments replace or add keys."""
        settings = {"database_path": self.database, "sample_limit": 0, "cache_dir": self.cache_dir,
                    "workdir": self.workdir, "worker_count": 2, "http_cache_dir": self.http_dir,
                    "offline": "true", "first_year": 2019, "last_year": 2021, **extra}
        path.write_text("[vulnmine]\n" + "".join(f"{k} = {v}\n" for k, v in settings.items()))
        return path


class _Git:
    def __init__(self, path: Path):
        self.path = path
        path.mkdir(parents=True)
        self("init", "--quiet", "-b", "main")

    def __call__(self, *args: str, date: str | None = None) -> str:
        env = {k: v for k, v in os.environ.items() if not k.startswith("GIT_")}
        env.update(_AUTHOR)
        env.update({"GIT_CONFIG_GLOBAL": os.devnull, "GIT_CONFIG_NOSYSTEM": "1"})
        if date:
            env["GIT_AUTHOR_DATE"] = env["GIT_COMMITTER_DATE"] = date
        out = subprocess.run(["git", "-c", "commit.gpgsign=false", *args], cwd=self.path, env=env,
                             check=True, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        return out.stdout.decode().strip()

    def write(self, rel: str, content: str | bytes) -> None:
        target = self.path / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, bytes):
            target.write_bytes(content)
        else:
            target.write_bytes(content.encode())

    def commit(self, message: str, date: str) -> str:
        self("add", "-A")
        self("commit", "--quiet", "-m", message, date=date)
        return self("rev-parse", "HEAD")


def _build_repos(world: World) -> None:
    c = world.commits
    g = _Git(world.root / "repos" / "parser")
    g.write("src/parse.c", PARSE_C_V0)
    g.write("tools/check.py", CHECK_PY_V0)
    g.write("README.md", README_V0)
    g.write("logo.png", LOGO_V0)
    c["A0"] = g.commit("Initial import", "2019-12-01T09:00:00+00:00")
    g.write("src/parse.c", PARSE_C_V1)
    g.write("logo.png", LOGO_V1)
    c["A1"] = g.commit("Clamp header length before copying\n\nFixes an overflow.", "2020-02-11T00:00:00+00:00")
    g.write("tools/check.py", CHECK_PY_V1)
    g.write("README.md", README_V1)
    c["A2"] = g.commit("Reject markup in names", "2020-03-06T12:00:00+00:00")
    g("checkout", "--quiet", "-b", "feature")
    g.write("src/parse.c", PARSE_C_V2)
    c["A3f"] = g.commit("Reject negative lengths", "2020-04-10T08:00:00+00:00")
    g("checkout", "--quiet", "main")
    g.write("tools/check.py", CHECK_PY_V2)
    c["A3m"] = g.commit("Bump banner", "2020-04-15T08:00:00+00:00")
    g("merge", "--quiet", "--no-ff", "-m", "Merge branch 'feature'", "feature",
      date="2020-04-21T06:00:00+00:00")
    c["A4"] = g("rev-parse", "HEAD")
    world.repos["parser"] = g.path

    g = _Git(world.root / "repos" / "webapp")
    g.write("app.js", APP_JS_V0)
    g.write("old_name.js", OLD_NAME_JS)
    g.write("index.php", INDEX_PHP_V0)
    c["B0"] = g.commit("Start webapp", "2020-11-01T00:00:00+00:00")
    g.write("app.js", APP_JS_V1)
    (g.path / "old_name.js").unlink()
    g.write("lib/new_name.js", OLD_NAME_JS)
    c["B1"] = g.commit("Escape user names", "2021-01-08T00:00:00+00:00")
    g.write("index.php", INDEX_PHP_V1)
    c["B2"] = g.commit("Escape greeting", "2021-01-15T00:00:00+00:00")
    world.repos["webapp"] = g.path

    g = _Git(world.root / "repos" / "tool")
    g.write("main.go", MAIN_GO_V0)
    c["C0"] = g.commit("Initial tool", "2019-04-28T10:00:00+00:00")
    g.write("main.go", MAIN_GO_V1)
    c["C1"] = g.commit("Bound inputs", "2019-06-10T20:00:00+00:00")
    world.repos["tool"] = g.path


def _items(world: World) -> dict[int, list[dict]]:
    c = world.commits
    gh = "https://github.com/acme/parser/commit/"

    def item(cve_id, urls, cwes, published, **kw):
        return make_item(cve_id, description=f"Issue {cve_id} in a fixture project.", urls=urls, cwes=cwes,
                         published=published, modified=published[:4] + "-12-01T00:00Z",
                         v2=V2.get(cve_id), v3=V3.get(cve_id), **kw)

    return {
        2019: [
            item("CVE-2019-3001", [f"https://bitbucket.org/gamma/tool/commits/{c['C0']}"], ["CWE-190"],
                 "2019-05-01T10:00Z"),
            item("CVE-2019-3002", [f"https://bitbucket.org/gamma/tool/commits/{c['C1']}"], ["unknown"],
                 "2019-06-10T08:00Z"),
        ],
        2020: [
            item("CVE-2020-1001", ["https://acme.example.com/security/2020-01", gh + c["A1"],
                                   gh + "f" * 40], ["CWE-787"], "2020-02-01T00:00Z"),
            item("CVE-2020-1002", [gh + c["A2"]], ["CWE-79"], "2020-03-01T12:00Z"),
            item("CVE-2020-1003", [gh + c["A2"][:7].upper() + "?diff=split"], ["CWE-20"], "2020-03-04T12:00Z"),
            item("CVE-2020-1004", [gh + c["A4"]], ["NVD-CWE-Other"], "2020-04-01T00:00Z"),
            item("CVE-2020-1005", ["https://github.com/ghost/vanished/commit/" + "a" * 40], ["CWE-22"],
                 "2020-05-01T00:00Z"),
            make_item("CVE-2020-1006", description="** REJECT ** DO NOT USE THIS CANDIDATE NUMBER.",
                      urls=[gh + c["A1"]], published="2020-06-01T00:00Z", modified="2020-06-02T00:00Z"),
            item("CVE-2020-1007", ["https://acme.example.com/security/2020-07"], ["CWE-200"], "2020-07-01T00:00Z"),
        ],
        2021: [
            item("CVE-2021-2001", [f"https://gitlab.com/beta/webapp/-/commit/{c['B1']}",
                                   f"https://gitlab.com/beta/webapp/commit/{c['B2']}"], ["CWE-79"],
                 "2021-01-10T00:00Z"),
            item("CVE-2021-2002", ["https://github.com/acme/parser/pull/9"], ["CWE-79"], "2021-02-01T00:00Z"),
        ],
    }


def _record_http(world: World) -> None:
    d = world.http_dir
    for year, items in _items(world).items():
        doc = make_feed(items)
        save_response(d, StoredResponse(feeds.FEED_URL.format(year=year), 200, gz_feed(doc)))
        save_response(d, StoredResponse(feeds.META_URL.format(year=year), 200, meta_text(doc).encode()))
    api = "https://api.github.com/repos/"
    save_response(d, ok(api + "acme/parser", github_repo(
        "acme", "parser", description="Wire-format header parser", language="C",
        created_at="2019-12-01T09:00:00Z", pushed_at="2020-04-21T06:00:00Z",
        homepage="https://parser.example.org", stargazers_count=120, forks_count=14)))
    save_response(d, StoredResponse(api + "ghost/vanished", 404,
                                    b'{"message": "Not Found", "documentation_url": "https://docs.github.com/rest"}'))
    gl = "https://gitlab.com/api/v4/projects/beta%2Fwebapp"
    save_response(d, ok(gl, gitlab_project("beta/webapp", description="Small web app", star_count=9,
                                           forks_count=2, created_at="2020-11-01T00:00:00.000Z",
                                           last_activity_at="2021-01-15T00:00:00.000Z")))
    save_response(d, ok(gl + "/languages", {"JavaScript": 71.4, "PHP": 28.6}))
    bb = "https://api.bitbucket.org/2.0/repositories/gamma/tool"
    save_response(d, ok(bb, bitbucket_repo("gamma/tool", description="Adder tool", language="go",
                                           created_on="2019-04-28T10:00:00+00:00",
                                           updated_on="2019-06-10T20:00:00+00:00")))
    save_response(d, ok(bb + "/forks", bitbucket_forks(1)), {"pagelen": 1})


def build_world(root: Path) -> World:
    root = Path(root)
    world = World(root, http_dir=root / "http", cache_dir=root / "cache", workdir=root / "work",
                  database=root / "db" / "fixture.sqlite")
    _build_repos(world)
    _record_http(world)
    return world
