"""Combine semantic and keyword scores and rank attack patterns per CVE.

The overall score is the plain sum of the base (semantic) score and the
keyword score. Patterns are ranked by descending overall score with ties
broken by ascending numeric CAPEC id, so rankings are fully deterministic.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .corpus import AttackPattern, VulnerabilityRecord
from .embedding import EmbeddingProvider, attribute_similarities
from .errors import DataError, FormatError, ScoringError
from .keywords import (
    MAX_KEYWORD_SCORE,
    KeywordMatchResult,
    keyword_score,
)
from .textnorm import AcronymDictionary, Normalizer, default_normalizer, load_acronyms

logger = logging.getLogger(__name__)

MODE_BASE = "base"
MODE_HYBRID = "hybrid"


def overall_score(base: float, keyword: float) -> float:
    """base + keyword, with contract checks on the input ranges."""
    if not 0.0 <= base <= 1.0:
        raise ValueError(f"base score {base} outside [0, 1]")
    if not 0.0 <= keyword <= MAX_KEYWORD_SCORE:
        raise ValueError(f"keyword score {keyword} outside [0, 1/3]")
    return base + keyword


@dataclass(eq=False)
class AssociationScore:
    """Scores for one (CVE, CAPEC) pair; overall = base + keyword exactly."""

    cve_id: str
    capec_id: str
    base_score: float
    keyword_score: float
    overall_score: float
    # Explainability extras, not part of the serialized row.
    attribute_scores: Mapping[str, float] | None = None
    keyword_detail: KeywordMatchResult | None = None

    def row(self) -> tuple[str, str, float, float, float]:
        return (
            self.cve_id,
            self.capec_id,
            self.base_score,
            self.keyword_score,
            self.overall_score,
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, AssociationScore) and self.row() == other.row()

    @property
    def capec_number(self) -> int:
        return int(self.capec_id.split("-")[1])


@dataclass
class RankedList:
    """Attack patterns for one CVE, ordered best-first (rank 1 = entries[0])."""

    cve_id: str
    entries: list[AssociationScore]

    def ranks(self) -> Iterator[tuple[int, AssociationScore]]:
        return ((i + 1, entry) for i, entry in enumerate(self.entries))

    def rank_of(self, capec_id: str) -> int | None:
        for position, entry in self.ranks():
            if entry.capec_id == capec_id:
                return position
        return None

    def capec_ids(self) -> list[str]:
        return [entry.capec_id for entry in self.entries]


def _sorted_entries(entries: list[AssociationScore]) -> list[AssociationScore]:
    return sorted(entries, key=lambda e: (-e.overall_score, e.capec_number))


def score_pair(
    v: VulnerabilityRecord,
    ap: AttackPattern,
    provider: EmbeddingProvider,
    dictionary: AcronymDictionary | None = None,
    *,
    mode: str = MODE_HYBRID,
    strip_versions: bool = True,
    normalizer: Normalizer | None = None,
) -> AssociationScore:
    breakdown = attribute_similarities(v, ap, provider, strip_versions=strip_versions)
    if mode == MODE_HYBRID:
        detail = keyword_score(v, ap, dictionary, normalizer)
        kw = detail.score
    elif mode == MODE_BASE:
        detail, kw = None, 0.0
    else:
        raise ValueError(f"unknown scoring mode {mode!r}")
    return AssociationScore(
        cve_id=v.cve_id,
        capec_id=ap.capec_id,
        base_score=breakdown.base_score,
        keyword_score=kw,
        overall_score=overall_score(breakdown.base_score, kw),
        attribute_scores=breakdown.per_attribute,
        keyword_detail=detail,
    )


def rank_patterns(
    v: VulnerabilityRecord,
    patterns: Sequence[AttackPattern],
    provider: EmbeddingProvider,
    dictionary: AcronymDictionary | None = None,
    *,
    mode: str = MODE_HYBRID,
    strip_versions: bool = True,
    normalizer: Normalizer | None = None,
) -> RankedList:
    """Score every pattern for one CVE and sort into a RankedList."""
    if not patterns:
        raise ScoringError(f"{v.cve_id}: no patterns to rank")
    if mode == MODE_HYBRID:
        normalizer = normalizer or default_normalizer()
        if dictionary is None:
            dictionary = load_acronyms(normalizer=normalizer)
    entries = [
        score_pair(
            v,
            ap,
            provider,
            dictionary,
            mode=mode,
            strip_versions=strip_versions,
            normalizer=normalizer,
        )
        for ap in patterns
    ]
    return RankedList(cve_id=v.cve_id, entries=_sorted_entries(entries))


def rank_corpus(
    vulnerabilities: Sequence[VulnerabilityRecord],
    patterns: Sequence[AttackPattern],
    provider: EmbeddingProvider,
    dictionary: AcronymDictionary | None = None,
    *,
    mode: str = MODE_HYBRID,
    strip_versions: bool = True,
    normalizer: Normalizer | None = None,
    errors: list[tuple[str, Exception]] | None = None,
) -> list[RankedList]:
    """One RankedList per CVE, in input order.

    Per-CVE failures are logged (and appended to `errors` when given);
    successfully ranked CVEs are still returned.
    """
    if mode == MODE_HYBRID:
        normalizer = normalizer or default_normalizer()
        if dictionary is None:
            dictionary = load_acronyms(normalizer=normalizer)
    results: list[RankedList] = []
    for v in vulnerabilities:
        try:
            results.append(
                rank_patterns(
                    v,
                    patterns,
                    provider,
                    dictionary,
                    mode=mode,
                    strip_versions=strip_versions,
                    normalizer=normalizer,
                )
            )
        except (DataError, ValueError) as exc:
            logger.warning("skipping %s: %s", v.cve_id, exc)
            if errors is not None:
                errors.append((v.cve_id, exc))
    return results


# ---------------------------------------------------------------------------
# Ranking CSV
# ---------------------------------------------------------------------------

RANKING_HEADER = ["cve_id", "rank", "capec_id", "base_score", "keyword_score", "overall_score"]


def write_rankings(path: Path | str, rankings: Iterable[RankedList]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RANKING_HEADER)
        for ranked in rankings:
            for position, entry in ranked.ranks():
                writer.writerow(
                    [
                        entry.cve_id,
                        position,
                        entry.capec_id,
                        repr(entry.base_score),
                        repr(entry.keyword_score),
                        repr(entry.overall_score),
                    ]
                )


def read_rankings(path: Path | str) -> list[RankedList]:
    """Load a ranking CSV back into RankedLists, checking rank contiguity."""
    rankings: list[RankedList] = []
    current: RankedList | None = None
    finished: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RANKING_HEADER:
            raise FormatError(f"{path}: expected header {','.join(RANKING_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != len(RANKING_HEADER):
                raise FormatError(f"{path}: line {lineno}: expected 6 columns")
            cve_id, rank_text, capec_id, base, keyword, overall = row
            try:
                rank = int(rank_text)
                entry = AssociationScore(
                    cve_id=cve_id,
                    capec_id=capec_id,
                    base_score=float(base),
                    keyword_score=float(keyword),
                    overall_score=float(overall),
                )
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
            if current is None or current.cve_id != cve_id:
                if current is not None:
                    finished.add(current.cve_id)
                if cve_id in finished:
                    raise FormatError(
                        f"{path}: line {lineno}: rows for {cve_id} are not contiguous"
                    )
                current = RankedList(cve_id=cve_id, entries=[])
                rankings.append(current)
            if rank != len(current.entries) + 1:
                raise FormatError(
                    f"{path}: line {lineno}: rank {rank} breaks the 1..n sequence "
                    f"for {cve_id}"
                )
            current.entries.append(entry)
    return rankings
