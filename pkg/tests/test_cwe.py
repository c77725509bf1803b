import io
import zipfile

import pytest
from hypothesis import given, strategies as st

from nvdkit import FakeSession, make_feed, make_item
from vulnmine.cwe import (
    NOINFO, OTHER, CweAssignment, assign, load_catalog, normalize_label, parse_catalog_text,
    refresh_snapshot,
)
from vulnmine.feeds import parse_feed
from vulnmine.http import StoredResponse

XML = """<?xml version="1.0" encoding="UTF-8"?>
<Weakness_Catalog xmlns="http://cwe.mitre.org/cwe-7" Name="CWE" Version="4.5">
 <Weaknesses>
  <Weakness ID="79" Name="Improper Neutralization of Input During Web Page Generation ('Cross-site Scripting')" Abstraction="Base" Structure="Simple" Status="Stable">
   <Description>The product does not neutralize input.</Description>
   <Extended_Description><xhtml:p xmlns:xhtml="http://www.w3.org/1999/xhtml">More   text.</xhtml:p></Extended_Description>
  </Weakness>
 </Weaknesses>
 <Categories>
  <Category ID="189" Name="Numeric Errors" Status="Draft"><Summary>Numbers.</Summary></Category>
 </Categories>
</Weakness_Catalog>
"""


def record(labels, cve_id="CVE-2020-0001"):
    return parse_feed(make_feed([make_item(cve_id, cwes=labels)])).records[0]


def test_snapshot_has_pseudo_entries():
    catalog = load_catalog()
    assert NOINFO in catalog and OTHER in catalog
    assert len(catalog) > 50


def test_snapshot_cwe79_name_and_kinds():
    catalog = load_catalog()
    assert catalog["CWE-79"].name.startswith("Improper Neutralization of Input During Web Page Generation")
    assert catalog["CWE-79"].url == "https://cwe.mitre.org/data/definitions/79.html"
    assert not catalog["CWE-79"].is_category
    assert catalog["CWE-189"].is_category


def test_csv_source_listing_cwe79(tmp_path):
    path = tmp_path / "cwe.csv"
    path.write_text("CWE-ID,Name,Weakness Abstraction,Status,Description\n"
                    "79,Improper Neutralization of Input During Web Page Generation,Base,Stable,XSS\n")
    catalog = load_catalog(path)
    assert catalog["CWE-79"].name == "Improper Neutralization of Input During Web Page Generation"
    assert catalog["CWE-79"].is_category is False
    assert len(catalog) == 3


def test_empty_source_gives_only_pseudo_entries(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert sorted(e.cwe_id for e in load_catalog(path)) == sorted([NOINFO, OTHER])


def test_malformed_source_falls_back_to_snapshot(tmp_path, caplog):
    path = tmp_path / "bad.csv"
    path.write_text("id;label\n1;x\n")
    catalog = load_catalog(path)
    assert "CWE-79" in catalog
    assert "bundled snapshot" in caplog.text


def test_missing_source_falls_back(tmp_path):
    assert "CWE-79" in load_catalog(tmp_path / "nope.csv")


def test_xml_source():
    entries = {e.cwe_id: e for e in parse_catalog_text(XML)}
    assert entries["CWE-79"].description == "The product does not neutralize input."
    assert entries["CWE-79"].extended_description == "More text."
    assert entries["CWE-189"].is_category and entries["CWE-189"].description == "Numbers."


def test_unknown_ids_get_stubs(caplog):
    catalog = load_catalog(cwe_ids=["CWE-79", "CWE-99999"])
    stub = catalog["CWE-99999"]
    assert stub.description == "" and stub.name == "CWE-99999"
    assert "CWE-99999" in caplog.text


def test_refresh_snapshot(tmp_path):
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as archive:
        archive.writestr("cwec_v4.5.xml", XML)
    session = FakeSession({"https://cwe.mitre.org/data/xml/cwec_latest.xml.zip":
                           StoredResponse("u", 200, buffer.getvalue())})
    dest = tmp_path / "snap.csv"
    assert refresh_snapshot(dest, session=session) == 2
    catalog = load_catalog(dest)
    assert catalog["CWE-189"].is_category and catalog["CWE-79"].description.startswith("The product")


@pytest.mark.parametrize("raw, expected", [
    ("CWE-119", "CWE-119"), ("unknown", NOINFO), ("Unknown", NOINFO), ("", NOINFO), (None, NOINFO),
    ("NVD-CWE-Other", OTHER), ("NVD-CWE-noinfo", NOINFO), (" cwe-20 ", "CWE-20"),
])
def test_normalize_label(raw, expected):
    assert normalize_label(raw) == expected


@given(st.one_of(st.none(), st.text(max_size=12), st.integers(0, 2000).map(lambda n: f"CWE-{n}"),
                 st.sampled_from(["unknown", "UNKNOWN", "NVD-CWE-Other", "nvd-cwe-noinfo"])))
def test_normalize_is_idempotent(raw):
    once = normalize_label(raw)
    assert normalize_label(once) == once


def test_assign_dedupes():
    assert assign(record(["CWE-79", "CWE-79"])) == [CweAssignment("CVE-2020-0001", "CWE-79")]


def test_assign_with_unknown_matches_set_construction():
    labels = ["CWE-20", "unknown"]
    got = {a.cwe_id for a in assign(record(labels))}
    brute = set()
    for label in labels:
        brute.add(label if label.startswith("CWE-") else NOINFO)
    assert got == brute == {"CWE-20", NOINFO}


def test_assign_without_labels():
    assert assign(record([])) == [CweAssignment("CVE-2020-0001", NOINFO)]


@given(st.lists(st.sampled_from(["CWE-79", "CWE-20", "unknown", "", "NVD-CWE-Other", "CWE-787"]), max_size=6))
def test_assign_never_empty_and_ids_in_catalog(labels):
    catalog = load_catalog()
    result = assign(record(labels))
    assert result
    assert len({a.cwe_id for a in result}) == len(result)
    catalog.ensure(a.cwe_id for a in result)
    assert all(a.cwe_id in catalog for a in result)
