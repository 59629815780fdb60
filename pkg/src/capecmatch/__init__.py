"""capecmatch: rank CAPEC attack patterns for CVE vulnerabilities.

Combines per-attribute semantic similarity (clamped cosine over pluggable
sentence embeddings) with keyword/acronym matching, and ships a reproducible
Recall@K / Precision@K / F1@K / MRR evaluation harness.
"""

from .corpus import (
    AttackPattern,
    GroundTruth,
    VulnerabilityRecord,
    build_gt1,
    filter_non_deprecated,
    load_ground_truth,
    parse_capec_catalog,
    parse_nvd_feed,
)
from .embedding import (
    CacheBackedProvider,
    EmbeddingProvider,
    EmbeddingVector,
    HashedBagOfWordsProvider,
    MemoizingProvider,
    SimilarityBreakdown,
    WorkerProvider,
    attribute_similarities,
    cosine_similarity,
    read_cache,
    semantic_score,
    write_cache,
)
from .evaluation import (
    MetricsReport,
    ThreatMapping,
    f1_at_k,
    mrr,
    precision_at_k,
    recall_at_k,
    sweep_report,
    threat_precision_at_k,
    threat_recall_at_k,
)
from .keywords import AcronymOutcome, KeywordMatchResult, keyword_score
from .ranking import AssociationScore, RankedList, overall_score, rank_corpus, rank_patterns
from .textnorm import (
    AcronymDictionary,
    Normalizer,
    default_normalizer,
    detect_acronyms,
    load_acronyms,
    preprocess,
    strip_version_tokens,
)

__version__ = "0.1.0"

__all__ = [
    "AcronymDictionary",
    "AcronymOutcome",
    "AssociationScore",
    "AttackPattern",
    "CacheBackedProvider",
    "EmbeddingProvider",
    "EmbeddingVector",
    "GroundTruth",
    "HashedBagOfWordsProvider",
    "KeywordMatchResult",
    "MemoizingProvider",
    "MetricsReport",
    "Normalizer",
    "RankedList",
    "SimilarityBreakdown",
    "ThreatMapping",
    "VulnerabilityRecord",
    "WorkerProvider",
    "attribute_similarities",
    "build_gt1",
    "cosine_similarity",
    "default_normalizer",
    "detect_acronyms",
    "f1_at_k",
    "filter_non_deprecated",
    "keyword_score",
    "load_acronyms",
    "load_ground_truth",
    "mrr",
    "overall_score",
    "parse_capec_catalog",
    "parse_nvd_feed",
    "precision_at_k",
    "preprocess",
    "rank_corpus",
    "rank_patterns",
    "read_cache",
    "recall_at_k",
    "semantic_score",
    "strip_version_tokens",
    "sweep_report",
    "threat_precision_at_k",
    "threat_recall_at_k",
    "write_cache",
]
