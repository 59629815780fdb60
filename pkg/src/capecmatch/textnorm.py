"""Deterministic text preprocessing shared by keyword scoring and embedding input.

Pipeline: optional version-token stripping, lowercasing, punctuation splitting
(hyphens and slashes separate tokens), stop-word removal, table-driven
lemmatization with a suffix-stripping fallback, and acronym detection.

All resources (stop words, lemma table, acronym dictionary) are bundled data
files, so results are identical across platforms and runs. Every operation is
a pure function over immutable inputs.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Mapping

from .errors import FormatError, ParseError

_DATA_DIR = Path(__file__).resolve().parent / "data"

STOPWORDS_FILE = _DATA_DIR / "stopwords.txt"
LEMMAS_FILE = _DATA_DIR / "lemmas.tsv"
ACRONYMS_FILE = _DATA_DIR / "acronyms.csv"

# Tokens are maximal runs of ASCII alphanumerics in the lowercased text;
# everything else (punctuation, hyphens, slashes, whitespace) separates tokens.
_TOKEN_RE = re.compile(r"[0-9a-z]+")

TokenList = list[str]


# ---------------------------------------------------------------------------
# Version stripping
# ---------------------------------------------------------------------------

# Version grammar: optional leading `v`, digit groups separated by dots
# ("1.1.5", "v4.2.1"), a lone v-number ("v2"), or one of the suffix keywords
# sp/build/update fused with digits ("sp1", "build42"). The bare keywords
# build/update/sp also consume a following number or dotted version.
_DOTTED_VERSION = re.compile(r"v?\d+(?:\.\d+)+", re.IGNORECASE)
_V_NUMBER = re.compile(r"v\d+", re.IGNORECASE)
_SUFFIX_NUMBER = re.compile(r"(?:sp|build|update)\d+", re.IGNORECASE)
_NUMBER_OR_VERSION = re.compile(r"v?\d+(?:\.\d+)*", re.IGNORECASE)
_VERSION_KEYWORDS = frozenset({"sp", "build", "update"})

_EDGE_PUNCT = "()[]{}<>,;:'\""


def _version_core(word: str) -> str:
    """Strip surrounding punctuation so "(v1.1.5)," matches the grammar."""
    core = word.strip(_EDGE_PUNCT)
    return core.rstrip(".")


def _is_version_token(word: str) -> bool:
    core = _version_core(word)
    return bool(
        _DOTTED_VERSION.fullmatch(core)
        or _V_NUMBER.fullmatch(core)
        or _SUFFIX_NUMBER.fullmatch(core)
    )


def strip_version_tokens(text: str) -> str:
    """Remove version/update/build tokens from free text.

    "huge IT gallery v1.1.5 for Joomla" -> "huge IT gallery for Joomla".
    All other tokens keep their original spelling and order; runs of
    whitespace collapse to single spaces.
    """
    words = text.split()
    kept: list[str] = []
    i = 0
    while i < len(words):
        word = words[i]
        core = _version_core(word)
        if _is_version_token(word):
            i += 1
            continue
        if core.lower() in _VERSION_KEYWORDS and i + 1 < len(words):
            nxt = _version_core(words[i + 1])
            if _NUMBER_OR_VERSION.fullmatch(nxt):
                i += 2
                continue
        kept.append(word)
        i += 1
    return " ".join(kept)


# ---------------------------------------------------------------------------
# Lemmatization
# ---------------------------------------------------------------------------

# Trailing doubled consonants are undoubled after -ing/-ed stripping, except
# for l/s/z (install, pass, fuzz) where English keeps the double letter.
_NO_UNDOUBLE = frozenset("aeioulsz")


def _undouble(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in _NO_UNDOUBLE:
        return stem[:-1]
    return stem


def _suffix_strip_once(word: str) -> str:
    """One application of the suffix fallback (plural -s/-es, -ing, -ed)."""
    if word.endswith("ies") and len(word) >= 5:
        return word[:-3] + "y"
    if word.endswith("sses"):
        return word[:-2]
    if len(word) >= 5 and word.endswith(("xes", "ches", "shes")):
        return word[:-2]
    if (
        word.endswith("s")
        and len(word) >= 4
        and not word.endswith(("ss", "us", "is"))
    ):
        return word[:-1]
    if word.endswith("ing") and len(word) >= 7:
        return _undouble(word[:-3])
    if word.endswith("ed") and len(word) >= 5:
        return _undouble(word[:-2])
    return word


def lemmatize_token(token: str, table: Mapping[str, str]) -> str:
    """Reduce one lowercase token to its base form.

    The lookup table wins over the suffix fallback; rules are applied
    repeatedly until a fixed point, so the result is always stable under
    re-lemmatization.
    """
    word = token
    for _ in range(16):
        nxt = table.get(word)
        if nxt is None:
            nxt = _suffix_strip_once(word)
        if nxt == word:
            return word
        word = nxt
    return word


# ---------------------------------------------------------------------------
# Resource loading
# ---------------------------------------------------------------------------

def load_stopwords(path: Path | str = STOPWORDS_FILE) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            entry = line.strip().lower()
            if entry and not entry.startswith("#"):
                words.add(entry)
    return frozenset(words)


def load_lemma_table(path: Path | str = LEMMAS_FILE) -> dict[str, str]:
    """Load `form<TAB>lemma` rows and verify every lemma is a fixed point."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            entry = line.rstrip("\n")
            if not entry.strip() or entry.lstrip().startswith("#"):
                continue
            parts = entry.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise FormatError(f"{path}: line {lineno}: expected 'form<TAB>lemma'")
            table[parts[0].lower()] = parts[1].lower()
    for form, lemma in table.items():
        if lemmatize_token(lemma, table) != lemma:
            raise FormatError(
                f"{path}: lemma {lemma!r} (for {form!r}) is not a fixed point"
            )
    return table


@dataclass(frozen=True)
class Normalizer:
    """Bundles the stop-word list and lemma table behind `preprocess`.

    Results are memoized per text (ranking preprocesses the same pattern
    fields once per CVE otherwise); the memo never changes outputs.
    """

    stopwords: frozenset[str]
    lemmas: Mapping[str, str]
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    _MEMO_LIMIT = 1 << 16

    def preprocess(self, text: str) -> TokenList:
        """Lowercase, split on punctuation, drop stop words, lemmatize.

        Tokens whose lemma lands on a stop word are dropped as well, which
        makes the operation idempotent over its own joined output.
        """
        cached = self._memo.get(text)
        if cached is not None:
            return list(cached)
        out: list[str] = []
        for token in _TOKEN_RE.findall(text.lower()):
            if token in self.stopwords:
                continue
            lemma = lemmatize_token(token, self.lemmas)
            if lemma and lemma not in self.stopwords:
                out.append(lemma)
        if len(self._memo) >= self._MEMO_LIMIT:
            self._memo.clear()
        self._memo[text] = tuple(out)
        return out

    def lemmatize(self, token: str) -> str:
        return lemmatize_token(token.lower(), self.lemmas)


@lru_cache(maxsize=1)
def default_normalizer() -> Normalizer:
    return Normalizer(stopwords=load_stopwords(), lemmas=load_lemma_table())


def preprocess(text: str, normalizer: Normalizer | None = None) -> TokenList:
    """Module-level convenience wrapper around Normalizer.preprocess."""
    return (normalizer or default_normalizer()).preprocess(text)


# ---------------------------------------------------------------------------
# Acronym dictionary
# ---------------------------------------------------------------------------

@dataclass
class AcronymDictionary:
    """Bidirectional acronym <-> expansion mapping.

    Keys are stored uppercase; expansions are stored as preprocessed token
    tuples so they compare directly against preprocessed text. Lookup is
    case-insensitive on the acronym side.
    """

    entries: dict[str, list[tuple[str, ...]]] = field(default_factory=dict)
    _normalizer: Normalizer | None = None
    _match_tokens: dict[str, str] = field(default_factory=dict, repr=False, compare=False)

    def _norm(self) -> Normalizer:
        return self._normalizer or default_normalizer()

    def add(self, acronym: str, expansion: str, *, single_token_ok: bool = False) -> None:
        key = acronym.strip().upper()
        if not key:
            raise ValueError("empty acronym")
        tokens = tuple(self._norm().preprocess(expansion))
        if len(tokens) < 2 and not single_token_ok:
            raise ValueError(
                f"expansion {expansion!r} for {key} reduces to fewer than two "
                "tokens; pass single_token_ok=True to keep it"
            )
        bucket = self.entries.setdefault(key, [])
        if tokens not in bucket:
            bucket.append(tokens)
        self._match_tokens.setdefault(key, self._compute_match_token(key))

    def _compute_match_token(self, acronym: str) -> str:
        tokens = self._norm().preprocess(acronym)
        return tokens[0] if tokens else acronym.lower()

    def expansions(self, acronym: str) -> list[tuple[str, ...]]:
        return self.entries.get(acronym.strip().upper(), [])

    def match_token(self, acronym: str) -> str:
        """The token an acronym appears as after preprocessing."""
        key = acronym.strip().upper()
        hit = self._match_tokens.get(key)
        if hit is None:
            hit = self._match_tokens[key] = self._compute_match_token(key)
        return hit

    def items(self) -> Iterator[tuple[str, list[tuple[str, ...]]]]:
        return iter(self.entries.items())

    def __len__(self) -> int:
        return len(self.entries)


def load_acronyms(
    path: Path | str = ACRONYMS_FILE, normalizer: Normalizer | None = None
) -> AcronymDictionary:
    """Load the `acronym,expansion` CSV (multiple rows per acronym allowed)."""
    dictionary = AcronymDictionary(_normalizer=normalizer)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["acronym", "expansion"]:
            raise FormatError(f"{path}: expected header 'acronym,expansion'")
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ParseError("expected two columns", path=path, line=lineno)
            try:
                dictionary.add(row[0], row[1])
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
    return dictionary


def _contains_subsequence(tokens: list[str], phrase: tuple[str, ...]) -> bool:
    if not phrase or len(phrase) > len(tokens):
        return False
    first = phrase[0]
    for i in range(len(tokens) - len(phrase) + 1):
        if tokens[i] == first and tuple(tokens[i : i + len(phrase)]) == phrase:
            return True
    return False


def detect_acronyms(
    tokens: TokenList, dictionary: AcronymDictionary
) -> list[tuple[str, str]]:
    """Report every dictionary acronym present in a token list.

    An acronym counts as present when its own token appears, or when one of
    its expansion phrases appears as a contiguous token subsequence. Each
    (acronym, expansion) pair is reported once, in dictionary order.
    """
    found: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    token_set = set(tokens)
    for acronym, expansions in dictionary.items():
        label = acronym.lower()
        if dictionary.match_token(acronym) in token_set and expansions:
            pair = (label, " ".join(expansions[0]))
            if pair not in seen:
                seen.add(pair)
                found.append(pair)
        for expansion in expansions:
            if _contains_subsequence(tokens, expansion):
                pair = (label, " ".join(expansion))
                if pair not in seen:
                    seen.add(pair)
                    found.append(pair)
    return found
