"""CWE weakness catalog and normalization of the NVD's per-CVE weakness labels."""

from __future__ import annotations

import csv
import io
import logging
import re
import zipfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator
from xml.etree import ElementTree

import requests

logger = logging.getLogger(__name__)

NOINFO = "NVD-CWE-noinfo"
OTHER = "NVD-CWE-Other"
MITRE_XML_URL = "https://cwe.mitre.org/data/xml/cwec_latest.xml.zip"
DEFINITION_URL = "https://cwe.mitre.org/data/definitions/{num}.html"

_CWE_RE = re.compile(r"^CWE-(\d+)$", re.IGNORECASE)
_SNAPSHOT_COLUMNS = ["CWE-ID", "Name", "Weakness Abstraction", "Status", "Description",
                     "Extended Description", "Entry Type"]


class CatalogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CweEntry:
    cwe_id: str
    name: str
    description: str = ""
    extended_description: str | None = None
    url: str | None = None
    is_category: bool = False


@dataclass(frozen=True, order=True)
class CweAssignment:
    cve_id: str
    cwe_id: str


PSEUDO_ENTRIES = (
    CweEntry(NOINFO, "Insufficient Information",
             "There is insufficient information about the issue to classify it; details are unknown or unspecified."),
    CweEntry(OTHER, "Other",
             "NVD is only using a subset of CWE for mapping instead of the entire CWE, and the weakness type is not covered by that subset."),
)


class CweCatalog:
    """Mapping of cwe_id to CweEntry that always holds the two NVD pseudo-entries."""

    def __init__(self, entries: Iterable[CweEntry] = ()):
        self._entries: dict[str, CweEntry] = {e.cwe_id: e for e in PSEUDO_ENTRIES}
        for entry in entries:
            self._entries[entry.cwe_id] = entry

    def __contains__(self, cwe_id: object) -> bool:
        return cwe_id in self._entries

    def __getitem__(self, cwe_id: str) -> CweEntry:
        return self._entries[cwe_id]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[CweEntry]:
        return iter(sorted(self._entries.values(), key=lambda e: _sort_key(e.cwe_id)))

    def get(self, cwe_id: str) -> CweEntry | None:
        return self._entries.get(cwe_id)

    def ensure(self, cwe_ids: Iterable[str]) -> list[str]:
        """Add stub entries for ids the catalog lacks; returns the ids stubbed."""
        added = []
        for cwe_id in cwe_ids:
            if cwe_id in self._entries:
                continue
            match = _CWE_RE.match(cwe_id)
            url = DEFINITION_URL.format(num=match.group(1)) if match else None
            self._entries[cwe_id] = CweEntry(cwe_id, cwe_id, "", None, url, False)
            added.append(cwe_id)
        if added:
            logger.warning("CWE catalog has no entry for %s; stored as stubs", ", ".join(added))
        return added


def _sort_key(cwe_id: str) -> tuple[int, int, str]:
    match = _CWE_RE.match(cwe_id)
    return (1, int(match.group(1)), "") if match else (0, 0, cwe_id)


def _canonical_id(raw: str) -> str:
    text = raw.strip()
    if text.isdigit():
        return f"CWE-{int(text)}"
    match = _CWE_RE.match(text)
    if not match:
        raise CatalogFormatError(f"not a CWE id: {raw!r}")
    return f"CWE-{int(match.group(1))}"


def _parse_csv(text: str) -> list[CweEntry]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    if "CWE-ID" not in reader.fieldnames or "Name" not in reader.fieldnames:
        raise CatalogFormatError(f"CSV lacks CWE-ID/Name columns: {reader.fieldnames}")
    entries = []
    for row in reader:
        cwe_id = _canonical_id(row["CWE-ID"] or "")
        kind = (row.get("Entry Type") or "").strip().lower()
        entries.append(CweEntry(
            cwe_id=cwe_id,
            name=(row["Name"] or "").strip(),
            description=(row.get("Description") or row.get("Summary") or "").strip(),
            extended_description=(row.get("Extended Description") or "").strip() or None,
            url=DEFINITION_URL.format(num=cwe_id[4:]),
            is_category=kind == "category",
        ))
    return entries


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _element_text(element: ElementTree.Element | None) -> str:
    if element is None:
        return ""
    return " ".join("".join(element.itertext()).split())


def _parse_xml(text: str) -> list[CweEntry]:
    try:
        root = ElementTree.fromstring(text)
    except ElementTree.ParseError as exc:
        raise CatalogFormatError(f"bad CWE XML: {exc}") from exc
    entries = []
    for element in root.iter():
        kind = _local(element.tag)
        if kind not in ("Weakness", "Category"):
            continue
        children = {_local(c.tag): c for c in element}
        body = children.get("Description") if kind == "Weakness" else children.get("Summary")
        extended = _element_text(children.get("Extended_Description")) or None
        cwe_id = _canonical_id(element.get("ID", ""))
        entries.append(CweEntry(cwe_id, element.get("Name", "").strip(), _element_text(body), extended,
                                DEFINITION_URL.format(num=cwe_id[4:]), kind == "Category"))
    return entries


def parse_catalog_text(text: str) -> list[CweEntry]:
    """Entries from a MITRE CSV or XML export. Raises CatalogFormatError when malformed."""
    stripped = text.lstrip("﻿").strip()
    if not stripped:
        return []
    if stripped.startswith("<"):
        return _parse_xml(stripped)
    return _parse_csv(stripped)


def snapshot_text() -> str:
    return resources.files("vulnmine.data").joinpath("cwe_snapshot.csv").read_text(encoding="utf-8")


def load_catalog(source: str | Path | None = None, cwe_ids: Iterable[str] = ()) -> CweCatalog:
    """Build the catalog from ``source`` (a path to a CSV/XML export) or the bundled snapshot.

    A malformed or unreadable source falls back to the bundled snapshot. Ids in
    ``cwe_ids`` that the source lacks receive stub entries.
    """
    if source is None:
        entries = parse_catalog_text(snapshot_text())
    else:
        try:
            entries = parse_catalog_text(Path(source).read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, CatalogFormatError) as exc:
            logger.warning("CWE source %s unusable (%s); using bundled snapshot", source, exc)
            entries = parse_catalog_text(snapshot_text())
    catalog = CweCatalog(entries)
    catalog.ensure(cwe_ids)
    return catalog


def write_snapshot(entries: Iterable[CweEntry], dest: Path) -> Path:
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    with dest.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_SNAPSHOT_COLUMNS)
        for entry in sorted(entries, key=lambda e: _sort_key(e.cwe_id)):
            if not _CWE_RE.match(entry.cwe_id):
                continue
            writer.writerow([entry.cwe_id[4:], entry.name, "", "", entry.description,
                             entry.extended_description or "", "Category" if entry.is_category else "Weakness"])
    return dest


def refresh_snapshot(dest: Path, session=None, url: str = MITRE_XML_URL, timeout: float = 120.0) -> int:
    """Download the current MITRE list and store it as a snapshot CSV at ``dest``."""
    session = session or requests.Session()
    response = session.get(url, timeout=timeout)
    if response.status_code != 200:
        raise CatalogFormatError(f"HTTP {response.status_code} fetching {url}")
    with zipfile.ZipFile(io.BytesIO(response.content)) as archive:
        name = next(n for n in archive.namelist() if n.endswith(".xml"))
        entries = _parse_xml(archive.read(name).decode("utf-8"))
    write_snapshot(entries, dest)
    logger.info("wrote %d CWE entries to %s", len(entries), dest)
    return len(entries)


def normalize_label(raw: str | None) -> str:
    """Canonical weakness id for one NVD problem-type label.

    "CWE-<n>" and the NVD pseudo-ids pass through; "unknown", empty and
    missing labels, and anything unrecognizable, become NVD-CWE-noinfo.
    """
    text = (raw or "").strip()
    match = _CWE_RE.match(text)
    if match:
        return f"CWE-{match.group(1)}"
    lowered = text.lower()
    if lowered == OTHER.lower():
        return OTHER
    if lowered not in ("", "unknown", NOINFO.lower()):
        logger.debug("unrecognized CWE label %r mapped to %s", raw, NOINFO)
    return NOINFO


def assign(cve) -> list[CweAssignment]:
    """One assignment per distinct normalized label, never empty."""
    seen: dict[str, None] = {}
    for label in getattr(cve, "problem_types", None) or []:
        seen.setdefault(normalize_label(label))
    if not seen:
        seen[NOINFO] = None
    return [CweAssignment(cve.cve_id, cwe_id) for cwe_id in seen]
