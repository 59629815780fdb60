"""Per-attribute semantic similarity over a pluggable embedding provider.

Scores a CVE description against each populated CAPEC attribute with clamped
cosine similarity and aggregates the attribute scores by their mean. Vectors
can come from the deterministic hashed bag-of-words test provider, from a
persistent `TLEC1` vector cache, or from an external worker process speaking
a JSON-line protocol.
"""

from __future__ import annotations

import hashlib
import json
import re
import shlex
import struct
import subprocess
import sys
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import AttackPattern, VulnerabilityRecord
from .errors import FormatError, ProviderError, ScoringError, StaleCacheError
from .textnorm import strip_version_tokens

CACHE_MAGIC = b"TLEC1\n"

# CAPEC attributes scored against the CVE description, in fixed order.
SCORED_ATTRIBUTES = (
    "name",
    "description",
    "execution_flow",
    "prerequisites",
    "mitigations",
    "resources",
)


@dataclass(eq=False)
class EmbeddingVector:
    """A fixed-length float32 vector tagged with the model that produced it."""

    values: np.ndarray
    model_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 1:
            raise ValueError("embedding vector must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding vector contains non-finite values")

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingVector)
            and self.model_id == other.model_id
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )


class EmbeddingProvider(ABC):
    """Contract: deterministic (same text, same model_id -> same vector),
    never the zero vector for non-empty text."""

    model_id: str
    dimension: int

    @abstractmethod
    def embed(self, text: str) -> EmbeddingVector:
        raise NotImplementedError


_WORD_RE = re.compile(r"\w+")


class HashedBagOfWordsProvider(EmbeddingProvider):
    """Deterministic test provider: sha256-hashed token buckets, L2-normalized.

    No model download, no randomness; identical output across platforms, so
    the whole pipeline is bit-reproducible in tests.
    """

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self.model_id = f"hashbow-{dimension}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % self.dimension

    def embed(self, text: str) -> EmbeddingVector:
        tokens = _WORD_RE.findall(text.lower()) or [text]
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            counts[self._bucket(token)] += 1.0
        norm = np.linalg.norm(counts)
        if norm > 0:
            counts /= norm
        return EmbeddingVector(values=counts.astype(np.float32), model_id=self.model_id)


class MemoizingProvider(EmbeddingProvider):
    """In-memory wrapper so repeated texts embed once per run."""

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.model_id = inner.model_id
        self.dimension = inner.dimension
        self._memo: dict[str, EmbeddingVector] = {}

    def embed(self, text: str) -> EmbeddingVector:
        hit = self._memo.get(text)
        if hit is None:
            hit = self._memo[text] = self.inner.embed(text)
        return hit


def text_key(text: str) -> str:
    """Stable cache key for a text (sha256 hex digest of its UTF-8 bytes)."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class CacheBackedProvider(EmbeddingProvider):
    """Serves vectors from a `TLEC1` cache keyed by text_key(text)."""

    def __init__(self, cache_path: Path | str, expected_model_id: str | None = None):
        self.cache_path = str(cache_path)
        self._vectors = read_cache(cache_path, expected_model_id=expected_model_id)
        header = read_cache_header(cache_path)
        self.model_id = header[0]
        self.dimension = header[1]

    def embed(self, text: str) -> EmbeddingVector:
        vector = self._vectors.get(text_key(text))
        if vector is None:
            raise StaleCacheError(
                f"text missing from vector cache {self.cache_path}; "
                "re-run `capecmatch embed` over the current corpus"
            )
        return vector


# ---------------------------------------------------------------------------
# Cosine similarity and per-attribute aggregation
# ---------------------------------------------------------------------------

def cosine_similarity(x: EmbeddingVector, y: EmbeddingVector) -> float:
    """(x . y) / (|x| |y|), in [-1, 1]. Both vectors must share model and dimension."""
    if x.model_id != y.model_id:
        raise ValueError(f"model mismatch: {x.model_id!r} vs {y.model_id!r}")
    if x.dimension != y.dimension:
        raise ValueError(f"dimension mismatch: {x.dimension} vs {y.dimension}")
    xv = x.values.astype(np.float64)
    yv = y.values.astype(np.float64)
    nx = float(np.linalg.norm(xv))
    ny = float(np.linalg.norm(yv))
    if nx == 0.0 or ny == 0.0:
        raise ValueError("cosine similarity is undefined for the zero vector")
    return float(np.dot(xv, yv) / (nx * ny))


@dataclass(frozen=True)
class SimilarityBreakdown:
    """Per-attribute clamped cosine scores and their mean."""

    per_attribute: Mapping[str, float]
    n: int
    base_score: float


def semantic_score(breakdown: SimilarityBreakdown) -> float:
    """Mean of the per-attribute scores."""
    if breakdown.n < 1 or not breakdown.per_attribute:
        raise ValueError("breakdown has no scored attributes")
    return sum(breakdown.per_attribute.values()) / breakdown.n


@lru_cache(maxsize=65536)
def _strip_for_embedding(text: str) -> str:
    stripped = strip_version_tokens(text)
    # A text made only of version tokens would strip to nothing; fall back.
    return stripped if stripped.strip() else text


def embedding_input_text(text: str, strip_versions: bool) -> str:
    """The exact string the pipeline embeds for a raw corpus text."""
    return _strip_for_embedding(text) if strip_versions else text


def attribute_similarities(
    v: VulnerabilityRecord,
    ap: AttackPattern,
    provider: EmbeddingProvider,
    *,
    strip_versions: bool = True,
) -> SimilarityBreakdown:
    """Clamped cosine between the CVE description and each populated attribute.

    Missing attributes are skipped (the mean divides by the number actually
    scored). Raises ScoringError if every attribute is empty.
    """
    if not v.description.strip():
        raise ScoringError(f"{v.cve_id}: empty description")
    cve_vector = provider.embed(embedding_input_text(v.description, strip_versions))
    scores: dict[str, float] = {}
    for attribute in SCORED_ATTRIBUTES:
        text = getattr(ap, attribute)
        if not text or not text.strip():
            continue
        vector = provider.embed(embedding_input_text(text, strip_versions))
        raw = cosine_similarity(cve_vector, vector)
        scores[attribute] = min(max(raw, 0.0), 1.0)
    if not scores:
        raise ScoringError(f"{ap.capec_id}: no non-empty attributes to score")
    n = len(scores)
    return SimilarityBreakdown(
        per_attribute=scores, n=n, base_score=sum(scores.values()) / n
    )


# ---------------------------------------------------------------------------
# Vector cache (magic TLEC1; header model_id<TAB>dim<TAB>count; then records
# of <u32 key length><key bytes><dim x float32 little-endian>)
# ---------------------------------------------------------------------------

def write_cache(
    entries: Iterable[tuple[str, str]],
    provider: EmbeddingProvider,
    path: Path | str,
) -> int:
    """Embed (key, text) pairs and persist them; returns the record count."""
    vectors = [(key, provider.embed(text)) for key, text in entries]
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        header = f"{provider.model_id}\t{provider.dimension}\t{len(vectors)}\n"
        fh.write(header.encode("utf-8"))
        for key, vector in vectors:
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<I", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(vector.values.astype("<f4").tobytes())
    return len(vectors)


def _read_header_line(fh, path) -> tuple[str, int, int]:
    raw = bytearray()
    while True:
        byte = fh.read(1)
        if not byte:
            raise FormatError(f"{path}: truncated cache header")
        if byte == b"\n":
            break
        raw.extend(byte)
        if len(raw) > 4096:
            raise FormatError(f"{path}: cache header too long")
    parts = raw.decode("utf-8").split("\t")
    if len(parts) != 3:
        raise FormatError(f"{path}: cache header must be model_id<TAB>dim<TAB>count")
    try:
        return parts[0], int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric dimension/count in header") from exc


def read_cache_header(path: Path | str) -> tuple[str, int, int]:
    """(model_id, dimension, count) of a cache file, validating the magic."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}; not a TLEC1 vector cache")
        return _read_header_line(fh, path)


def read_cache(
    path: Path | str, expected_model_id: str | None = None
) -> dict[str, EmbeddingVector]:
    """Load a vector cache into a key -> EmbeddingVector mapping.

    Rejects files whose model differs from expected_model_id (stale cache).
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}; not a TLEC1 vector cache")
        model_id, dimension, count = _read_header_line(fh, path)
        if expected_model_id is not None and model_id != expected_model_id:
            raise StaleCacheError(
                f"{path}: cache holds model {model_id!r}, expected "
                f"{expected_model_id!r}; re-run `capecmatch embed`"
            )
        vectors: dict[str, EmbeddingVector] = {}
        record_bytes = 4 * dimension
        for index in range(count):
            length_raw = fh.read(4)
            if len(length_raw) != 4:
                raise FormatError(f"{path}: truncated record {index}")
            (key_length,) = struct.unpack("<I", length_raw)
            key_raw = fh.read(key_length)
            values_raw = fh.read(record_bytes)
            if len(key_raw) != key_length or len(values_raw) != record_bytes:
                raise FormatError(f"{path}: truncated record {index}")
            values = np.frombuffer(values_raw, dtype="<f4").copy()
            vectors[key_raw.decode("utf-8")] = EmbeddingVector(
                values=values, model_id=model_id
            )
    return vectors


# ---------------------------------------------------------------------------
# Worker line protocol client
# ---------------------------------------------------------------------------

def default_worker_command(model: str) -> list[str]:
    return [sys.executable, "-m", "capecmatch_worker", "serve", "--model", model]


class WorkerProvider(EmbeddingProvider):
    """Client for an external embedding worker process.

    Protocol (UTF-8, one JSON object per line): the worker first emits a
    handshake {"model":..., "dim":..., "proto":1}; then for each request
    {"id":..., "text":...} it emits {"id":..., "vector":[...]} in order.
    An empty line shuts the worker down cleanly.
    """

    def __init__(self, command: Sequence[str] | str):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise ProviderError(f"cannot launch worker {self.command!r}: {exc}") from exc
        handshake_line = self._proc.stdout.readline()
        if not handshake_line:
            raise ProviderError("worker exited before sending a handshake")
        try:
            handshake = json.loads(handshake_line)
        except json.JSONDecodeError as exc:
            raise ProviderError(f"bad worker handshake line: {handshake_line!r}") from exc
        if "error" in handshake:
            raise ProviderError(f"worker handshake failed: {handshake['error']}")
        try:
            self.model_id = str(handshake["model"])
            self.dimension = int(handshake["dim"])
            proto = int(handshake.get("proto", 1))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed worker handshake: {handshake!r}") from exc
        if proto != 1:
            raise ProviderError(f"unsupported worker protocol version {proto}")
        if self.dimension <= 0:
            raise ProviderError(f"worker reported non-positive dimension {self.dimension}")
        self._next_id = 0

    def embed(self, text: str) -> EmbeddingVector:
        request_id = str(self._next_id)
        self._next_id += 1
        payload = json.dumps({"id": request_id, "text": text}, ensure_ascii=False)
        try:
            self._proc.stdin.write(payload + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ProviderError(f"worker pipe failed: {exc}") from exc
        if not line:
            raise ProviderError("worker closed the stream mid-session")
        response = json.loads(line)
        if "error" in response:
            raise ProviderError(f"worker error for request {request_id}: {response['error']}")
        if response.get("id") != request_id:
            raise ProviderError(
                f"worker answered id {response.get('id')!r} for request {request_id!r}"
            )
        values = np.asarray(response["vector"], dtype=np.float32)
        if values.shape != (self.dimension,):
            raise ProviderError(
                f"worker vector has shape {values.shape}, expected ({self.dimension},)"
            )
        return EmbeddingVector(values=values, model_id=self.model_id)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write("\n")
                self._proc.stdin.flush()
                self._proc.stdin.close()
            except (BrokenPipeError, OSError):
                pass
            self._proc.wait(timeout=30)

    def __enter__(self) -> "WorkerProvider":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
