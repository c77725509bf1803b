"""NVD JSON 1.1 vulnerability feeds: download, cache, parse, flatten, filter."""

from __future__ import annotations

import gzip
import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

import requests

from vulnmine.references import resolve

logger = logging.getLogger(__name__)

FEED_VERSION = "1.1"
FEED_URL = "https://nvd.nist.gov/feeds/json/cve/1.1/nvdcve-1.1-{year}.json.gz"
META_URL = "https://nvd.nist.gov/feeds/json/cve/1.1/nvdcve-1.1-{year}.meta"
FIRST_YEAR = 2002

CVE_ID_RE = re.compile(r"^CVE-\d{4}-\d{4,}$")
REJECT_MARKER = "** REJECT **"


class FeedError(Exception):
    """Base class for feed problems."""


class FeedFetchError(FeedError):
    """A year's feed could neither be downloaded nor read from cache (fatal)."""

    def __init__(self, year: int, reason: str):
        super().__init__(f"cannot obtain NVD feed for {year}: {reason}")
        self.year = year


class FeedCorruptError(FeedError):
    def __init__(self, year: int, reason: str):
        super().__init__(f"NVD feed for {year} is corrupt: {reason}")
        self.year = year


# -- timestamps ---------------------------------------------------------------

def parse_timestamp(value: str) -> datetime:
    """Parse NVD/forge/git timestamps into an aware UTC datetime."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """Canonical form: UTC ISO-8601 with second precision, e.g. 2021-01-05T18:10:00Z."""
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def normalize_timestamp(value: str | None) -> str | None:
    if not value:
        return None
    return format_timestamp(parse_timestamp(value))


# -- CVSS -------------------------------------------------------------------

_V2_FIELDS = {
    "AV": ("access_vector", {"L": "LOCAL", "A": "ADJACENT_NETWORK", "N": "NETWORK"}),
    "AC": ("access_complexity", {"H": "HIGH", "M": "MEDIUM", "L": "LOW"}),
    "Au": ("authentication", {"M": "MULTIPLE", "S": "SINGLE", "N": "NONE"}),
    "C": ("confidentiality_impact", {"N": "NONE", "P": "PARTIAL", "C": "COMPLETE"}),
    "I": ("integrity_impact", {"N": "NONE", "P": "PARTIAL", "C": "COMPLETE"}),
    "A": ("availability_impact", {"N": "NONE", "P": "PARTIAL", "C": "COMPLETE"}),
}
_V3_IMPACT = {"H": "HIGH", "L": "LOW", "N": "NONE"}
_V3_FIELDS = {
    "AV": ("attack_vector", {"N": "NETWORK", "A": "ADJACENT_NETWORK", "L": "LOCAL", "P": "PHYSICAL"}),
    "AC": ("attack_complexity", {"L": "LOW", "H": "HIGH"}),
    "PR": ("privileges_required", {"N": "NONE", "L": "LOW", "H": "HIGH"}),
    "UI": ("user_interaction", {"N": "NONE", "R": "REQUIRED"}),
    "S": ("scope", {"U": "UNCHANGED", "C": "CHANGED"}),
    "C": ("confidentiality_impact", _V3_IMPACT),
    "I": ("integrity_impact", _V3_IMPACT),
    "A": ("availability_impact", _V3_IMPACT),
}


def _check_score(value: Any, what: str) -> float | None:
    if value is None:
        return None
    score = float(value)
    if not 0.0 <= score <= 10.0:
        raise ValueError(f"{what} {score} outside [0, 10]")
    return score


def _parse_vector(vector: str, fields: dict) -> dict[str, str]:
    out: dict[str, str] = {}
    for part in vector.split("/"):
        key, _, abbrev = part.partition(":")
        if key in fields:
            name, table = fields[key]
            if abbrev not in table:
                raise ValueError(f"bad CVSS component {part!r} in {vector!r}")
            out[name] = table[abbrev]
    missing = {name for name, _ in fields.values()} - out.keys()
    if missing:
        raise ValueError(f"CVSS vector {vector!r} lacks {sorted(missing)}")
    return out


def _build_vector(values: dict[str, str], fields: dict) -> str:
    parts = []
    for key, (name, table) in fields.items():
        inverse = {v: k for k, v in table.items()}
        parts.append(f"{key}:{inverse[values[name]]}")
    return "/".join(parts)


@dataclass(frozen=True)
class Cvss2Metrics:
    base_score: float
    access_vector: str
    access_complexity: str
    authentication: str
    confidentiality_impact: str
    integrity_impact: str
    availability_impact: str

    def __post_init__(self):
        _check_score(self.base_score, "CVSSv2 base score")

    @property
    def vector_string(self) -> str:
        return _build_vector(self.__dict__, _V2_FIELDS)

    @classmethod
    def from_vector(cls, vector: str, base_score: float) -> Cvss2Metrics:
        return cls(base_score=float(base_score), **_parse_vector(vector, _V2_FIELDS))


@dataclass(frozen=True)
class Cvss3Metrics:
    base_score: float
    attack_vector: str
    attack_complexity: str
    privileges_required: str
    user_interaction: str
    scope: str
    confidentiality_impact: str
    integrity_impact: str
    availability_impact: str
    version: str = "3.1"
    base_severity: str | None = None

    def __post_init__(self):
        _check_score(self.base_score, "CVSSv3 base score")

    @property
    def vector_string(self) -> str:
        return f"CVSS:{self.version}/" + _build_vector(self.__dict__, _V3_FIELDS)

    @classmethod
    def from_vector(cls, vector: str, base_score: float, base_severity: str | None = None) -> Cvss3Metrics:
        head, _, rest = vector.partition("/")
        if not head.startswith("CVSS:"):
            raise ValueError(f"not a CVSSv3 vector: {vector!r}")
        return cls(
            base_score=float(base_score),
            version=head[5:],
            base_severity=base_severity,
            **_parse_vector(rest, _V3_FIELDS),
        )


# -- records ------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceEntry:
    url: str
    tags: tuple[str, ...] = ()
    name: str | None = None
    refsource: str | None = None


@dataclass
class CveRecord:
    cve_id: str
    description: str
    published_date: str
    last_modified_date: str
    references: list[ReferenceEntry] = field(default_factory=list)
    problem_types: list[str] = field(default_factory=list)
    cvss2: Cvss2Metrics | None = None
    cvss3: Cvss3Metrics | None = None
    exploitability_score: float | None = None
    impact_score: float | None = None
    severity: str | None = None

    def __post_init__(self):
        if not CVE_ID_RE.match(self.cve_id):
            raise ValueError(f"malformed CVE id {self.cve_id!r}")
        if parse_timestamp(self.published_date) > parse_timestamp(self.last_modified_date):
            raise ValueError(f"{self.cve_id}: published after last modification")
        _check_score(self.exploitability_score, "exploitability score")
        _check_score(self.impact_score, "impact score")


@dataclass(frozen=True)
class ItemError:
    year: int | None
    index: int
    cve_id: str | None
    message: str


@dataclass
class ParseResult:
    records: list[CveRecord] = field(default_factory=list)
    errors: list[ItemError] = field(default_factory=list)
    rejected: int = 0
    conflicts: int = 0


def flatten(item: dict) -> tuple[dict[str, Any], list[str]]:
    """Collapse a nested CVE item into leaf-name -> value.

    The first occurrence (document order, depth first) of a leaf name wins;
    later occurrences with a different value are reported as conflicts.
    Lists are kept whole and not descended into.
    """
    flat: dict[str, Any] = {}
    conflicts: list[str] = []

    def walk(node: dict, prefix: str) -> None:
        for key, value in node.items():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(value, dict):
                walk(value, path)
            elif key not in flat:
                flat[key] = value
            elif flat[key] != value:
                conflicts.append(path)

    walk(item, "")
    return flat, conflicts


def _english(entries: Iterable[dict]) -> str:
    values = [e.get("value", "") for e in entries]
    english = [e.get("value", "") for e in entries if e.get("lang") == "en"]
    return (english or values or [""])[0]


def parse_item(item: dict) -> tuple[CveRecord, list[str]]:
    cve = item["cve"]
    flat, conflicts = flatten(item)
    cve_id = cve["CVE_data_meta"]["ID"]
    description = _english(cve.get("description", {}).get("description_data", []))

    references = []
    for ref in cve.get("references", {}).get("reference_data", []):
        url = (ref.get("url") or "").strip()
        if not url:
            continue
        references.append(ReferenceEntry(url, tuple(ref.get("tags") or ()), ref.get("name"), ref.get("refsource")))

    labels: list[str] = []
    for problem in cve.get("problemtype", {}).get("problemtype_data", []):
        labels.extend(d.get("value", "") for d in problem.get("description", []))

    impact = item.get("impact") or {}
    cvss2 = cvss3 = None
    v2 = (impact.get("baseMetricV2") or {}).get("cvssV2")
    if v2:
        cvss2 = Cvss2Metrics(
            base_score=float(v2["baseScore"]),
            access_vector=v2["accessVector"],
            access_complexity=v2["accessComplexity"],
            authentication=v2["authentication"],
            confidentiality_impact=v2["confidentialityImpact"],
            integrity_impact=v2["integrityImpact"],
            availability_impact=v2["availabilityImpact"],
        )
        if v2.get("vectorString") and cvss2.vector_string != v2["vectorString"]:
            conflicts.append("impact.baseMetricV2.cvssV2.vectorString")
    v3 = (impact.get("baseMetricV3") or {}).get("cvssV3")
    if v3:
        cvss3 = Cvss3Metrics(
            base_score=float(v3["baseScore"]),
            attack_vector=v3["attackVector"],
            attack_complexity=v3["attackComplexity"],
            privileges_required=v3["privilegesRequired"],
            user_interaction=v3["userInteraction"],
            scope=v3["scope"],
            confidentiality_impact=v3["confidentialityImpact"],
            integrity_impact=v3["integrityImpact"],
            availability_impact=v3["availabilityImpact"],
            version=str(v3.get("version", "3.1")),
            base_severity=v3.get("baseSeverity"),
        )
        if v3.get("vectorString") and cvss3.vector_string != v3["vectorString"]:
            conflicts.append("impact.baseMetricV3.cvssV3.vectorString")

    severity = flat.get("baseSeverity") or flat.get("severity")
    record = CveRecord(
        cve_id=cve_id,
        description=description,
        published_date=format_timestamp(parse_timestamp(item["publishedDate"])),
        last_modified_date=format_timestamp(parse_timestamp(item["lastModifiedDate"])),
        references=references,
        problem_types=labels,
        cvss2=cvss2,
        cvss3=cvss3,
        exploitability_score=_check_score(flat.get("exploitabilityScore"), "exploitability score"),
        impact_score=_check_score(flat.get("impactScore"), "impact score"),
        severity=severity,
    )
    return record, conflicts


def parse_feed(document: dict, year: int | None = None) -> ParseResult:
    """One CveRecord per CVE_Item, REJECTED entries dropped.

    Items that violate the schema are skipped and reported with their index.
    """
    result = ParseResult()
    for index, item in enumerate(document.get("CVE_Items") or []):
        cve_id = None
        try:
            cve_id = item["cve"]["CVE_data_meta"]["ID"]
            record, conflicts = parse_item(item)
        except (KeyError, TypeError, ValueError) as exc:
            result.errors.append(ItemError(year, index, cve_id, f"{type(exc).__name__}: {exc}"))
            logger.warning("skipping CVE item %d (%s): %s", index, cve_id, exc)
            continue
        if record.description.startswith(REJECT_MARKER):
            result.rejected += 1
            continue
        if conflicts:
            result.conflicts += 1
            logger.debug("%s: flattened fields disagree at %s", record.cve_id, ", ".join(conflicts))
        result.records.append(record)
    return result


def filter_fix_referencing(records: Iterable[CveRecord]) -> list[CveRecord]:
    """Keep records with at least one forge commit reference, in order, unique by id."""
    out: list[CveRecord] = []
    seen: set[str] = set()
    for record in records:
        if record.cve_id in seen:
            continue
        if any(resolve(ref.url, record.cve_id) for ref in record.references):
            seen.add(record.cve_id)
            out.append(record)
    return out


# -- download + cache ----------------------------------------------------------

@dataclass
class FeedDocument:
    year: int
    data: dict
    sha256: str
    from_cache: bool


@dataclass
class FetchOutcome:
    documents: list[FeedDocument]
    failures: dict[int, str]


def cache_path(cache_dir: Path, year: int) -> Path:
    return Path(cache_dir) / f"nvdcve-{FEED_VERSION}-{year}.json.gz"


def manifest_path(cache_dir: Path) -> Path:
    return Path(cache_dir) / f"manifest-{FEED_VERSION}.json"


def _read_manifest(cache_dir: Path) -> dict[str, dict]:
    path = manifest_path(cache_dir)
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text())
    except (OSError, ValueError):
        return {}


def _remote_sha256(session, year: int, timeout: float) -> str | None:
    try:
        response = session.get(META_URL.format(year=year), timeout=timeout)
    except requests.RequestException:
        return None
    if response.status_code != 200:
        return None
    for line in response.text.splitlines():
        key, _, value = line.partition(":")
        if key.strip() == "sha256":
            return value.strip().lower()
    return None


def _decode_feed(year: int, raw: bytes) -> dict:
    try:
        data = json.loads(gzip.decompress(raw))
    except (OSError, EOFError, ValueError) as exc:
        raise FeedCorruptError(year, str(exc)) from exc
    if not isinstance(data, dict):
        raise FeedCorruptError(year, "top-level JSON is not an object")
    return data


def fetch_feed(
    year: int,
    cache_dir: Path,
    session=None,
    force_refresh: bool = False,
    check_updates: bool = False,
    timeout: float = 60.0,
) -> FeedDocument:
    cache_dir = Path(cache_dir)
    path = cache_path(cache_dir, year)
    session = session or requests.Session()

    if path.exists() and not force_refresh:
        raw = path.read_bytes()
        stale = False
        if check_updates:
            remote = _remote_sha256(session, year, timeout)
            known = _read_manifest(cache_dir).get(str(year), {}).get("sha256")
            stale = remote is not None and remote != known
        if not stale:
            data = _decode_feed(year, raw)
            return FeedDocument(year, data, hashlib.sha256(gzip.decompress(raw)).hexdigest(), True)

    url = FEED_URL.format(year=year)
    try:
        response = session.get(url, timeout=timeout)
        if response.status_code != 200:
            raise FeedFetchError(year, f"HTTP {response.status_code} from {url}")
    except (requests.RequestException, FeedFetchError) as exc:
        if path.exists() and not force_refresh:
            # stale but readable beats nothing when the server is away
            logger.warning("using cached %s feed, refresh failed: %s", year, exc)
            raw = path.read_bytes()
            return FeedDocument(year, _decode_feed(year, raw), hashlib.sha256(gzip.decompress(raw)).hexdigest(), True)
        if isinstance(exc, FeedFetchError):
            raise
        raise FeedFetchError(year, str(exc)) from exc
    raw = response.content
    data = _decode_feed(year, raw)

    cache_dir.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(raw)
    tmp.replace(path)
    digest = hashlib.sha256(gzip.decompress(raw)).hexdigest()
    return FeedDocument(year, data, digest, False)


def fetch_feeds(
    years: Iterable[int],
    cache_dir: Path,
    session=None,
    force_refresh: bool = False,
    check_updates: bool = False,
    workers: int = 4,
) -> FetchOutcome:
    """Obtain one decoded feed per year, in year order.

    A year that can be neither downloaded nor read from cache raises
    FeedFetchError. A corrupt feed is recorded in ``failures`` and the other
    years proceed.
    """
    years = sorted(set(years))
    if years and years[0] < FIRST_YEAR:
        raise ValueError(f"NVD feeds start in {FIRST_YEAR}, got {years[0]}")
    session = session or requests.Session()

    def one(year: int) -> FeedDocument | FeedCorruptError:
        try:
            return fetch_feed(year, cache_dir, session, force_refresh, check_updates)
        except FeedCorruptError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, years))

    documents: list[FeedDocument] = []
    failures: dict[int, str] = {}
    for year, result in zip(years, results):
        if isinstance(result, FeedCorruptError):
            logger.error("%s", result)
            failures[year] = str(result)
        else:
            documents.append(result)

    if documents:
        manifest = _read_manifest(cache_dir)
        for doc in documents:
            manifest[str(doc.year)] = {"sha256": doc.sha256, "file": cache_path(cache_dir, doc.year).name}
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        manifest_path(cache_dir).write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return FetchOutcome(documents, failures)
