"""Recall@K, Precision@K, F1@K, MRR against a ground truth, plus the
threat-grouped recall/precision variants and sweep reports for plotting.

Conventions: with `a` the set of ground-truth associations and TP@K_i the
number of a vulnerability's true patterns ranked in its top K,
Recall@K = sum_i TP@K_i / |a| and Precision@K = sum_i TP@K_i / (|a| * K).
The precision denominator is |a| * K (not N * K), so Recall@1 == Precision@1.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .corpus import GroundTruth
from .errors import EvaluationError, FormatError, ParseError
from .ranking import RankedList

logger = logging.getLogger(__name__)

RankingsLike = Union[Mapping[str, Sequence[str]], Iterable[RankedList]]


def ranking_map(rankings: RankingsLike) -> dict[str, list[str]]:
    """Normalize rankings to cve_id -> ordered capec id list."""
    if isinstance(rankings, Mapping):
        return {cve: list(ids) for cve, ids in rankings.items()}
    return {ranked.cve_id: ranked.capec_ids() for ranked in rankings}


def _require_rankings(rankings: dict[str, list[str]], gt: GroundTruth) -> None:
    missing = sorted(gt.cve_ids() - rankings.keys())
    if missing:
        raise EvaluationError(
            f"ground-truth vulnerabilities missing from rankings: {', '.join(missing)}"
        )


def _true_positives_at_k(
    rankings: dict[str, list[str]], gt_by_cve: dict[str, set[str]], k: int
) -> int:
    total = 0
    for cve_id, true_patterns in gt_by_cve.items():
        top_k = rankings[cve_id][:k]
        total += sum(1 for capec_id in top_k if capec_id in true_patterns)
    return total


def recall_at_k(rankings: RankingsLike, gt: GroundTruth, k: int) -> float:
    """Fraction of ground-truth associations found within the top K."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if not gt.pairs:
        raise EvaluationError("empty ground truth")
    rmap = ranking_map(rankings)
    _require_rankings(rmap, gt)
    return _true_positives_at_k(rmap, gt.by_cve(), k) / len(gt.pairs)


def precision_at_k(rankings: RankingsLike, gt: GroundTruth, k: int) -> float:
    """True positives in the top K over |a| * K predictions."""
    if k < 1:
        raise ValueError("K must be >= 1")
    if not gt.pairs:
        raise EvaluationError("empty ground truth")
    rmap = ranking_map(rankings)
    _require_rankings(rmap, gt)
    return _true_positives_at_k(rmap, gt.by_cve(), k) / (len(gt.pairs) * k)


def f1_at_k(recall: float, precision: float) -> float:
    """Harmonic mean of recall and precision; 0 when both are 0."""
    if not 0.0 <= recall <= 1.0 or not 0.0 <= precision <= 1.0:
        raise ValueError("recall and precision must lie in [0, 1]")
    if recall + precision == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def mrr(rankings: RankingsLike, gt: GroundTruth) -> float:
    """Mean reciprocal rank of the first correct pattern per vulnerability."""
    rmap = ranking_map(rankings)
    _require_rankings(rmap, gt)
    grouped = gt.by_cve()
    if not grouped:
        raise EvaluationError("empty ground truth")
    total = 0.0
    for cve_id, true_patterns in grouped.items():
        first_rank = None
        for position, capec_id in enumerate(rmap[cve_id], start=1):
            if capec_id in true_patterns:
                first_rank = position
                break
        if first_rank is None:
            raise EvaluationError(
                f"{cve_id}: no ground-truth pattern appears in its ranking "
                "(rankings should cover the whole catalog; corpus mismatch?)"
            )
        total += 1.0 / first_rank
    return total / len(grouped)


# ---------------------------------------------------------------------------
# Threat-grouped variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThreatMapping:
    """capec_id -> threat_id (each attack pattern maps to at most one threat)."""

    mapping: Mapping[str, str]

    def threat_of(self, capec_id: str) -> str | None:
        return self.mapping.get(capec_id)

    def threat_ids(self) -> list[str]:
        return sorted(set(self.mapping.values()))


THREAT_MAP_HEADER = ["capec_id", "threat_id"]


def load_threat_mapping(path: Path | str) -> ThreatMapping:
    mapping: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != THREAT_MAP_HEADER:
            raise FormatError(f"{path}: expected header 'capec_id,threat_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ParseError("expected two columns", path=path, line=lineno)
            capec_id, threat_id = row[0].strip().upper(), row[1].strip()
            previous = mapping.get(capec_id)
            if previous is not None and previous != threat_id:
                raise ParseError(
                    f"{capec_id} maps to both {previous} and {threat_id}",
                    path=path,
                    line=lineno,
                )
            mapping[capec_id] = threat_id
    return ThreatMapping(mapping=mapping)


def threat_vulnerabilities(gt: GroundTruth, mapping: ThreatMapping, threat_id: str) -> set[str]:
    """Ground-truth vulnerabilities associated with a threat via their patterns."""
    return {
        cve_id
        for cve_id, capec_id in gt.pairs
        if mapping.threat_of(capec_id) == threat_id
    }


def _hits_by_rank(
    rankings: dict[str, list[str]],
    mapping: ThreatMapping,
    vulnerabilities: set[str],
    threat_id: str,
    k: int,
) -> int:
    hits = 0
    for cve_id in vulnerabilities:
        for capec_id in rankings[cve_id][:k]:
            if mapping.threat_of(capec_id) == threat_id:
                hits += 1
                break
    return hits


def threat_recall_at_k(
    rankings: RankingsLike,
    gt: GroundTruth,
    mapping: ThreatMapping,
    threat_id: str,
    k: int,
) -> float:
    """|V_k| / |V|: fraction of the threat's vulnerabilities whose top K
    contains some pattern mapped to the threat."""
    if k < 1:
        raise ValueError("K must be >= 1")
    rmap = ranking_map(rankings)
    vulnerabilities = threat_vulnerabilities(gt, mapping, threat_id)
    if not vulnerabilities:
        raise EvaluationError(f"no ground-truth vulnerabilities for threat {threat_id}")
    missing = sorted(vulnerabilities - rmap.keys())
    if missing:
        raise EvaluationError(
            f"threat {threat_id}: vulnerabilities missing from rankings: {', '.join(missing)}"
        )
    return _hits_by_rank(rmap, mapping, vulnerabilities, threat_id, k) / len(vulnerabilities)


def threat_precision_at_k(
    rankings: RankingsLike,
    gt: GroundTruth,
    mapping: ThreatMapping,
    threat_id: str,
    k: int,
) -> float:
    """|V_k| / (|V| * k), the precision analog of the threat-grouped recall."""
    return threat_recall_at_k(rankings, gt, mapping, threat_id, k) / k


def unmapped_gt_patterns(gt: GroundTruth, mapping: ThreatMapping) -> list[str]:
    """Ground-truth patterns with no threat assignment (reported as warnings)."""
    return sorted(
        capec_id for capec_id in gt.capec_ids() if mapping.threat_of(capec_id) is None
    )


# ---------------------------------------------------------------------------
# Sweep report
# ---------------------------------------------------------------------------

class KMetrics(NamedTuple):
    recall: float
    precision: float
    f1: float


@dataclass
class MetricsReport:
    """Recall/precision/F1 for K = 1..K_max plus MRR, tagged with a model label."""

    model: str
    per_k: dict[int, KMetrics]
    mrr: float
    n_vulnerabilities: int = field(default=0, compare=False)
    n_associations: int = field(default=0, compare=False)


def sweep_report(
    rankings: RankingsLike, gt: GroundTruth, k_max: int, model: str = "model"
) -> MetricsReport:
    """Metrics for every K in 1..K_max plus MRR."""
    if k_max < 1:
        raise ValueError("K_max must be >= 1")
    rmap = ranking_map(rankings)
    per_k: dict[int, KMetrics] = {}
    previous_recall = 0.0
    for k in range(1, k_max + 1):
        recall = recall_at_k(rmap, gt, k)
        precision = precision_at_k(rmap, gt, k)
        per_k[k] = KMetrics(recall, precision, f1_at_k(recall, precision))
        assert recall >= previous_recall, "recall must be non-decreasing in K"
        previous_recall = recall
    assert per_k[1].recall == per_k[1].precision, "Recall@1 must equal Precision@1"
    return MetricsReport(
        model=model,
        per_k=per_k,
        mrr=mrr(rmap, gt),
        n_vulnerabilities=len(gt.by_cve()),
        n_associations=len(gt.pairs),
    )


REPORT_HEADER = ["model", "K", "recall", "precision", "f1"]


def write_metrics_report(path: Path | str, report: MetricsReport) -> None:
    """Report CSV: one row per K, then a trailing `model,MRR,<value>` record."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for k in sorted(report.per_k):
            m = report.per_k[k]
            writer.writerow([report.model, k, repr(m.recall), repr(m.precision), repr(m.f1)])
        writer.writerow([report.model, "MRR", repr(report.mrr)])


def read_metrics_report(path: Path | str) -> MetricsReport:
    model = None
    per_k: dict[int, KMetrics] = {}
    mrr_value = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != REPORT_HEADER:
            raise FormatError(f"{path}: expected header {','.join(REPORT_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            model = row[0] if model is None else model
            if row[1] == "MRR":
                mrr_value = float(row[2])
                continue
            try:
                per_k[int(row[1])] = KMetrics(float(row[2]), float(row[3]), float(row[4]))
            except (IndexError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    if model is None or mrr_value is None or not per_k:
        raise FormatError(f"{path}: incomplete metrics report")
    return MetricsReport(model=model, per_k=per_k, mrr=mrr_value)
