"""Keyword relevance score for a (CVE, CAPEC) pair.

The pattern name and each alternate term are matched independently against
the preprocessed CVE description and the best field wins. A field that is an
acronym's full expansion (or whose extra words beyond the acronym all appear
in the description) earns the maximum score of 1/3; otherwise the score is
the matched-keyword ratio scaled into [0, 1/3].
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .corpus import AttackPattern, VulnerabilityRecord
from .textnorm import (
    AcronymDictionary,
    Normalizer,
    TokenList,
    _contains_subsequence,
    default_normalizer,
    load_acronyms,
)

MAX_KEYWORD_SCORE = 1.0 / 3.0

SOURCE_NAME = "name"


class AcronymOutcome(Enum):
    FULL_ACRONYM_MATCH = "full_acronym_match"
    PARTIAL_ACRONYM_EXTRAS_FOUND = "partial_acronym_extras_found"
    NO_ACRONYM = "no_acronym"


@dataclass(frozen=True)
class KeywordMatchResult:
    """Outcome of keyword matching for the best-scoring CAPEC field."""

    matched_keywords: frozenset[str]
    total_keywords: int
    acronym_outcome: AcronymOutcome
    score: float
    source: str


def extract_keywords(field_text: str, normalizer: Normalizer | None = None) -> TokenList:
    """Preprocessed, lemmatized keyword tokens of a CAPEC field."""
    return (normalizer or default_normalizer()).preprocess(field_text)


def _remove_first_span(tokens: list[str], phrase: tuple[str, ...]) -> list[str] | None:
    """Tokens with the first contiguous occurrence of phrase removed, or None."""
    if not phrase or len(phrase) > len(tokens):
        return None
    for i in range(len(tokens) - len(phrase) + 1):
        if tuple(tokens[i : i + len(phrase)]) == phrase:
            return tokens[:i] + tokens[i + len(phrase) :]
    return None


def acronym_match(
    cve_tokens: TokenList,
    field_tokens: TokenList,
    dictionary: AcronymDictionary,
) -> tuple[AcronymOutcome, tuple[str, ...]]:
    """Classify a CAPEC field against the acronym dictionary.

    Full match: the field is exactly an expansion, optionally with the
    acronym itself attached (either side), or the acronym alone, and the
    acronym or expansion also occurs in the CVE tokens. Partial match: the
    field contains an acronym or expansion plus extra tokens, and every extra
    token occurs in the CVE tokens. Returns the outcome plus the extra tokens
    that were searched (sorted, empty unless partial).
    """
    cve_set = set(cve_tokens)
    partial: tuple[AcronymOutcome, tuple[str, ...]] | None = None
    for acronym, expansions in dictionary.items():
        token = dictionary.match_token(acronym)
        for expansion in expansions:
            exp = list(expansion)
            full_shapes = (exp, [token], exp + [token], [token] + exp)
            present_in_cve = token in cve_set or _contains_subsequence(
                cve_tokens, expansion
            )
            if field_tokens in full_shapes:
                if present_in_cve:
                    return AcronymOutcome.FULL_ACRONYM_MATCH, ()
                continue
            if partial is not None:
                continue
            remainder = _remove_first_span(field_tokens, expansion)
            if remainder is None and token in field_tokens:
                remainder = [t for t in field_tokens if t != token]
            elif remainder is not None:
                remainder = [t for t in remainder if t != token]
            if remainder is None or not remainder:
                continue
            extras = set(remainder)
            if extras <= cve_set:
                partial = (
                    AcronymOutcome.PARTIAL_ACRONYM_EXTRAS_FOUND,
                    tuple(sorted(extras)),
                )
    if partial is not None:
        return partial
    return AcronymOutcome.NO_ACRONYM, ()


def _score_field(
    cve_tokens: TokenList,
    field_text: str,
    dictionary: AcronymDictionary,
    normalizer: Normalizer,
    source: str,
) -> KeywordMatchResult:
    field_tokens = normalizer.preprocess(field_text)
    field_set = set(field_tokens)
    matched = frozenset(field_set & set(cve_tokens))
    total = len(field_set)
    if not field_tokens:
        return KeywordMatchResult(frozenset(), 0, AcronymOutcome.NO_ACRONYM, 0.0, source)
    outcome, _extras = acronym_match(cve_tokens, field_tokens, dictionary)
    if outcome is not AcronymOutcome.NO_ACRONYM:
        score = MAX_KEYWORD_SCORE
    else:
        score = len(matched) / (3.0 * total)
    return KeywordMatchResult(matched, total, outcome, score, source)


def keyword_score(
    v: VulnerabilityRecord,
    ap: AttackPattern,
    dictionary: AcronymDictionary | None = None,
    normalizer: Normalizer | None = None,
) -> KeywordMatchResult:
    """Best keyword match over the pattern name and each alternate term.

    CVE tokens are computed once from the raw description (no version
    stripping here). Ties keep the earliest field, so the name wins over
    alternate terms.
    """
    normalizer = normalizer or default_normalizer()
    if dictionary is None:
        dictionary = load_acronyms(normalizer=normalizer)
    cve_tokens = normalizer.preprocess(v.description)
    best = _score_field(cve_tokens, ap.name, dictionary, normalizer, SOURCE_NAME)
    for term in ap.alternate_terms:
        candidate = _score_field(
            cve_tokens, term, dictionary, normalizer, f"alternate_term:{term}"
        )
        if candidate.score > best.score:
            best = candidate
    return best
