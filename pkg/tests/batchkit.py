"""A realistic single-repository Batch built from the fixture world."""

import fixture_world as fw
from nvdkit import make_item
from vulnmine.changes import extract
from vulnmine.cwe import CweAssignment, load_catalog
from vulnmine.feeds import parse_item
from vulnmine.forges import RepositoryMeta
from vulnmine.gitrepo import open_repo
from vulnmine.storage import Batch, FixRow


def parser_batch(world) -> Batch:
    repo = open_repo(world.repos["parser"], fw.REPO_URLS["parser"])
    a1 = extract(repo, world.commits["A1"])
    record, _ = parse_item(make_item("CVE-2020-1001", urls=[fw.REPO_URLS["parser"] + "/commit/" + world.commits["A1"]],
                                     cwes=["CWE-787"]))
    meta = RepositoryMeta(fw.REPO_URLS["parser"], "parser", "Parser", "2019-12-01T09:00:00Z",
                          "2020-04-21T06:00:00Z", None, "C", 14, 120)
    return Batch(
        cves=[record],
        cwes=list(load_catalog()),
        classifications=[CweAssignment("CVE-2020-1001", "CWE-787")],
        repositories=[meta],
        commits=[a1.commit],
        fixes=[FixRow("CVE-2020-1001", a1.commit.hash, fw.REPO_URLS["parser"])],
        files=a1.files,
        methods=a1.methods,
    )
