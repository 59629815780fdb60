"""Per-year share of CVEs that reference at least one CWE.

Rejected/reserved placeholder entries count here (they are published
identifiers) even though scoring corpora exclude them. The year is taken
from the CVE identifier, not the publication date.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import VulnerabilityRecord
from .errors import FormatError


@dataclass(frozen=True)
class YearCoverage:
    year: int
    total: int
    with_cwe: int
    percentage: float

    def __post_init__(self):
        if not 0 <= self.with_cwe <= self.total:
            raise ValueError(f"{self.year}: with_cwe {self.with_cwe} outside 0..{self.total}")


def cwe_coverage_by_year(records: Iterable[VulnerabilityRecord]) -> list[YearCoverage]:
    """One YearCoverage per year present in the records, sorted ascending."""
    totals: dict[int, int] = {}
    with_cwe: dict[int, int] = {}
    for record in records:
        totals[record.year] = totals.get(record.year, 0) + 1
        if record.cwe_refs:
            with_cwe[record.year] = with_cwe.get(record.year, 0) + 1
    return [
        YearCoverage(
            year=year,
            total=totals[year],
            with_cwe=with_cwe.get(year, 0),
            percentage=with_cwe.get(year, 0) / totals[year],
        )
        for year in sorted(totals)
    ]


STATS_HEADER = ["year", "total", "with_cwe", "percentage"]


def write_year_coverage(path: Path | str, rows: Iterable[YearCoverage]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATS_HEADER)
        for row in rows:
            writer.writerow([row.year, row.total, row.with_cwe, repr(row.percentage)])


def read_year_coverage(path: Path | str) -> list[YearCoverage]:
    rows: list[YearCoverage] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != STATS_HEADER:
            raise FormatError(f"{path}: expected header {','.join(STATS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            try:
                rows.append(
                    YearCoverage(int(row[0]), int(row[1]), int(row[2]), float(row[3]))
                )
            except (IndexError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return rows
