"""Parse NVD CVE feeds and the CAPEC XML catalog into normalized records.

Also builds/loads ground-truth association sets and round-trips the internal
JSON-lines corpus cache. Parsing is single-writer per file; the produced
records are plain immutable-ish dataclasses safe to share across threads.
"""

from __future__ import annotations

import csv
import gzip
import json
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import FormatError, ParseError, UnsupportedSchemaError

logger = logging.getLogger(__name__)

CVE_ID_RE = re.compile(r"CVE-\d{4}-\d{4,}", re.IGNORECASE)
CAPEC_ID_RE = re.compile(r"CAPEC-\d+", re.IGNORECASE)
CWE_ID_RE = re.compile(r"CWE-\d+", re.IGNORECASE)

# NVD placeholder descriptions for identifiers that were never (or no longer
# are) real entries; these records are kept for statistics but flagged so
# scoring corpora can exclude them.
_PLACEHOLDER_RE = re.compile(r"^\s*\*\*\s*(REJECT|RESERVED)")

DEPRECATED_STATUS = "Deprecated"


def _valid_cve_id(cve_id: str) -> bool:
    return CVE_ID_RE.fullmatch(cve_id) is not None


def _valid_capec_id(capec_id: str) -> bool:
    return CAPEC_ID_RE.fullmatch(capec_id) is not None


def cve_year(cve_id: str) -> int:
    """Year field of a CVE identifier (CVE-YYYY-NNNN...)."""
    return int(cve_id.split("-")[1])


@dataclass
class VulnerabilityRecord:
    """One CVE entry: identifier, description, CWE references, year."""

    cve_id: str
    description: str
    cwe_refs: list[str] = field(default_factory=list)
    year: int = 0
    rejected: bool = False

    def __post_init__(self):
        if not _valid_cve_id(self.cve_id):
            raise ValueError(f"invalid CVE identifier: {self.cve_id!r}")
        self.cve_id = self.cve_id.upper()
        if not self.description.strip():
            raise ValueError(f"{self.cve_id}: empty description")
        if not self.year:
            self.year = cve_year(self.cve_id)
        elif self.year != cve_year(self.cve_id):
            raise ValueError(
                f"{self.cve_id}: year {self.year} does not match identifier"
            )


@dataclass
class AttackPattern:
    """One CAPEC entry with the six scored attributes plus metadata."""

    capec_id: str
    name: str
    status: str = ""
    description: str = ""
    execution_flow: str = ""
    prerequisites: str = ""
    mitigations: str = ""
    resources: str = ""
    alternate_terms: list[str] = field(default_factory=list)
    example_cves: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not _valid_capec_id(self.capec_id):
            raise ValueError(f"invalid CAPEC identifier: {self.capec_id!r}")
        self.capec_id = self.capec_id.upper()
        if not self.name.strip():
            raise ValueError(f"{self.capec_id}: empty name")

    @property
    def numeric_id(self) -> int:
        return int(self.capec_id.split("-")[1])


@dataclass(frozen=True)
class GroundTruth:
    """A deduplicated set of (cve_id, capec_id) associations."""

    pairs: frozenset[tuple[str, str]]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GroundTruth":
        cleaned = set()
        for cve_id, capec_id in pairs:
            cve_id, capec_id = cve_id.strip().upper(), capec_id.strip().upper()
            if not _valid_cve_id(cve_id):
                raise ValueError(f"invalid CVE identifier in pair: {cve_id!r}")
            if not _valid_capec_id(capec_id):
                raise ValueError(f"invalid CAPEC identifier in pair: {capec_id!r}")
            cleaned.add((cve_id, capec_id))
        return cls(pairs=frozenset(cleaned))

    def by_cve(self) -> dict[str, set[str]]:
        grouped: dict[str, set[str]] = {}
        for cve_id, capec_id in self.pairs:
            grouped.setdefault(cve_id, set()).add(capec_id)
        return grouped

    def cve_ids(self) -> set[str]:
        return {cve for cve, _ in self.pairs}

    def capec_ids(self) -> set[str]:
        return {capec for _, capec in self.pairs}

    def __len__(self) -> int:
        return len(self.pairs)


# ---------------------------------------------------------------------------
# NVD feed parsing
# ---------------------------------------------------------------------------

def _open_maybe_gzip(path: Path | str):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def _load_json(path: Path | str) -> dict:
    try:
        with _open_maybe_gzip(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"malformed JSON: {exc.msg} (char {exc.pos})", path=path, line=exc.lineno
        ) from exc
    except (OSError, gzip.BadGzipFile) as exc:
        raise ParseError(f"cannot read feed: {exc}", path=path) from exc


def _first_english(descriptions: Sequence[dict], value_key: str = "value") -> str:
    for entry in descriptions:
        if entry.get("lang", "en").startswith("en"):
            return entry.get(value_key, "")
    if descriptions:
        return descriptions[0].get(value_key, "")
    return ""


def _cwe_refs_from_values(values: Iterable[str]) -> list[str]:
    refs: list[str] = []
    for value in values:
        for match in CWE_ID_RE.findall(value or ""):
            normalized = match.upper()
            if normalized not in refs:
                refs.append(normalized)
    return refs


def _parse_nvd_11(doc: dict, path) -> list[VulnerabilityRecord]:
    records = []
    for index, item in enumerate(doc.get("CVE_Items", [])):
        cve = item.get("cve", {})
        meta = cve.get("CVE_data_meta", {})
        cve_id = meta.get("ID", "")
        if not _valid_cve_id(cve_id):
            raise ParseError(f"entry #{index}: bad or missing CVE id {cve_id!r}", path=path)
        description = _first_english(
            cve.get("description", {}).get("description_data", [])
        )
        if not description.strip():
            raise ParseError(f"{cve_id}: empty description", path=path)
        values = []
        for ptype in cve.get("problemtype", {}).get("problemtype_data", []):
            for desc in ptype.get("description", []):
                values.append(desc.get("value", ""))
        records.append(
            VulnerabilityRecord(
                cve_id=cve_id,
                description=description,
                cwe_refs=_cwe_refs_from_values(values),
                rejected=bool(_PLACEHOLDER_RE.match(description)),
            )
        )
    return records


def _parse_nvd_20(doc: dict, path) -> list[VulnerabilityRecord]:
    records = []
    for index, item in enumerate(doc.get("vulnerabilities", [])):
        cve = item.get("cve", {})
        cve_id = cve.get("id", "")
        if not _valid_cve_id(cve_id):
            raise ParseError(f"entry #{index}: bad or missing CVE id {cve_id!r}", path=path)
        description = _first_english(cve.get("descriptions", []))
        if not description.strip():
            raise ParseError(f"{cve_id}: empty description", path=path)
        values = []
        for weakness in cve.get("weaknesses", []):
            for desc in weakness.get("description", []):
                values.append(desc.get("value", ""))
        records.append(
            VulnerabilityRecord(
                cve_id=cve_id,
                description=description,
                cwe_refs=_cwe_refs_from_values(values),
                rejected=bool(_PLACEHOLDER_RE.match(description)),
            )
        )
    return records


def parse_nvd_feed(path: Path | str) -> list[VulnerabilityRecord]:
    """Parse an NVD JSON data feed (gzip or plain; schema 1.1 or 2.0).

    Entries whose description is a "** REJECT **"/"** RESERVED **"
    placeholder are returned with rejected=True so scoring corpora can drop
    them while statistics keep them.
    """
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ParseError("feed root is not an object", path=path)
    if "CVE_Items" in doc:
        return _parse_nvd_11(doc, path)
    if "vulnerabilities" in doc:
        return _parse_nvd_20(doc, path)
    version = doc.get("version") or doc.get("CVE_data_version") or "unknown"
    raise UnsupportedSchemaError(
        f"unrecognized NVD feed schema (version {version}); "
        "expected schema 1.1 (CVE_Items) or 2.0 (vulnerabilities)",
        path=path,
    )


def scoring_records(records: Iterable[VulnerabilityRecord]) -> list[VulnerabilityRecord]:
    """Records usable for ranking: placeholder (rejected/reserved) entries removed."""
    return [r for r in records if not r.rejected]


# ---------------------------------------------------------------------------
# CAPEC catalog parsing
# ---------------------------------------------------------------------------

def _element_text(element: ET.Element | None) -> str:
    if element is None:
        return ""
    return " ".join(" ".join(element.itertext()).split())


def _sentence_join(parts: Iterable[str]) -> str:
    cleaned = [p.strip() for p in parts if p and p.strip()]
    return " ".join(p if p.endswith((".", "!", "?")) else p + "." for p in cleaned)


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_execution_flow(flow: ET.Element | None) -> str:
    """Flatten attack steps to text: phase, then step description, then techniques."""
    if flow is None:
        return ""
    parts: list[str] = []
    for step in flow:
        if _strip_ns(step.tag) != "Attack_Step":
            continue
        phase = description = ""
        techniques: list[str] = []
        for child in step:
            tag = _strip_ns(child.tag)
            if tag == "Phase":
                phase = _element_text(child)
            elif tag == "Description":
                description = _element_text(child)
            elif tag == "Technique":
                techniques.append(_element_text(child))
        parts.append(_sentence_join([phase, description, *techniques]))
    return " ".join(p for p in parts if p)


def parse_capec_catalog(path: Path | str) -> list[AttackPattern]:
    """Parse a CAPEC v3.x XML catalog into AttackPattern records.

    View and Category elements are ignored. Example Instances text is scanned
    for CVE identifiers, which populate example_cves.
    """
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise ParseError(
            f"malformed XML: {exc}", path=path, line=getattr(exc, "position", (None,))[0]
        ) from exc
    except OSError as exc:
        raise ParseError(f"cannot read catalog: {exc}", path=path) from exc

    root = tree.getroot()
    if "capec" not in root.tag.lower():
        raise UnsupportedSchemaError(
            f"root element {root.tag!r} does not look like a CAPEC catalog", path=path
        )

    patterns: list[AttackPattern] = []
    for index, element in enumerate(root.iter()):
        if _strip_ns(element.tag) != "Attack_Pattern":
            continue
        raw_id = element.get("ID", "")
        name = element.get("Name", "")
        if not raw_id:
            raise ParseError(
                f"Attack_Pattern #{len(patterns)} (name={name!r}) is missing its ID",
                path=path,
            )
        if not name.strip():
            raise ParseError(f"Attack_Pattern ID={raw_id} is missing its name", path=path)

        fields: dict[str, str] = {
            "description": "",
            "execution_flow": "",
            "prerequisites": "",
            "mitigations": "",
            "resources": "",
        }
        alternate_terms: list[str] = []
        example_texts: list[str] = []
        for child in element:
            tag = _strip_ns(child.tag)
            if tag == "Description":
                fields["description"] = _element_text(child)
            elif tag == "Execution_Flow":
                fields["execution_flow"] = _parse_execution_flow(child)
            elif tag == "Prerequisites":
                fields["prerequisites"] = _sentence_join(
                    _element_text(p) for p in child
                )
            elif tag == "Mitigations":
                fields["mitigations"] = _sentence_join(
                    _element_text(m) for m in child
                )
            elif tag == "Resources_Required":
                fields["resources"] = _sentence_join(
                    _element_text(r) for r in child
                )
            elif tag == "Alternate_Terms":
                for term_el in child:
                    for sub in term_el:
                        if _strip_ns(sub.tag) == "Term":
                            term = _element_text(sub)
                            if term:
                                alternate_terms.append(term)
            elif tag == "Example_Instances":
                for example in child:
                    example_texts.append(_element_text(example))

        example_cves: list[str] = []
        for text in example_texts:
            for match in CVE_ID_RE.findall(text):
                normalized = match.upper()
                if normalized not in example_cves:
                    example_cves.append(normalized)

        patterns.append(
            AttackPattern(
                capec_id=f"CAPEC-{raw_id}",
                name=name,
                status=element.get("Status", ""),
                alternate_terms=alternate_terms,
                example_cves=example_cves,
                **fields,
            )
        )
    return patterns


def filter_non_deprecated(patterns: Iterable[AttackPattern]) -> list[AttackPattern]:
    """Keep only patterns whose status is not Deprecated; order preserved."""
    return [p for p in patterns if p.status.lower() != DEPRECATED_STATUS.lower()]


# ---------------------------------------------------------------------------
# Ground truths
# ---------------------------------------------------------------------------

def build_gt1(
    patterns: Iterable[AttackPattern],
    extra_pairs: Iterable[tuple[str, str]] = (),
) -> GroundTruth:
    """Ground truth from Example Instances CVE references plus manual extras.

    Extras referencing a CAPEC id absent from the catalog are kept with a
    warning (the ground truth may predate the catalog snapshot).
    """
    patterns = list(patterns)
    known = {p.capec_id for p in patterns}
    pairs: list[tuple[str, str]] = []
    for pattern in patterns:
        for cve_id in pattern.example_cves:
            pairs.append((cve_id, pattern.capec_id))
    for cve_id, capec_id in extra_pairs:
        capec_id = capec_id.strip().upper()
        if capec_id not in known:
            logger.warning(
                "extra ground-truth pair references unknown %s; keeping it", capec_id
            )
        pairs.append((cve_id, capec_id))
    return GroundTruth.from_pairs(pairs)


GROUND_TRUTH_HEADER = ["cve_id", "capec_id"]


def load_ground_truth(path: Path | str) -> GroundTruth:
    """Load a `cve_id,capec_id` CSV; duplicate rows collapse with a warning."""
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != GROUND_TRUTH_HEADER:
            raise FormatError(f"{path}: expected header 'cve_id,capec_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ParseError("expected two columns", path=path, line=lineno)
            cve_id, capec_id = row[0].strip().upper(), row[1].strip().upper()
            if not _valid_cve_id(cve_id):
                raise ParseError(f"bad CVE identifier {row[0]!r}", path=path, line=lineno)
            if not _valid_capec_id(capec_id):
                raise ParseError(f"bad CAPEC identifier {row[1]!r}", path=path, line=lineno)
            pair = (cve_id, capec_id)
            if pair in seen:
                logger.warning("%s: line %d: duplicate pair %s, collapsing", path, lineno, pair)
                continue
            seen.add(pair)
            pairs.append(pair)
    return GroundTruth.from_pairs(pairs)


def write_ground_truth(path: Path | str, gt: GroundTruth) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_HEADER)
        for cve_id, capec_id in sorted(gt.pairs):
            writer.writerow([cve_id, capec_id])


# ---------------------------------------------------------------------------
# Internal corpus cache (JSON lines, one self-describing record per line)
# ---------------------------------------------------------------------------

def _dump_record(record) -> str:
    return json.dumps(record.__dict__, sort_keys=True, ensure_ascii=False)


def write_vulnerabilities(path: Path | str, records: Iterable[VulnerabilityRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_dump_record(record) + "\n")


def read_vulnerabilities(path: Path | str) -> list[VulnerabilityRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(VulnerabilityRecord(**json.loads(line)))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return records


def write_patterns(path: Path | str, patterns: Iterable[AttackPattern]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pattern in patterns:
            fh.write(_dump_record(pattern) + "\n")


def read_patterns(path: Path | str) -> list[AttackPattern]:
    patterns = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                patterns.append(AttackPattern(**json.loads(line)))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return patterns
