"""Sentence encoders hosted by the worker.

Encoders return raw float32 vectors: no normalization or clamping happens
here, the consumer owns all numeric policy. Every encoder must be
deterministic (inference mode, no dropout) with a constant dimension.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

# Models the reference experiments used; any sentence-transformers id works.
KNOWN_SENTENCE_MODELS = (
    "all-distilroberta-v1",
    "paraphrase-mpnet-base-v2",
    "basel/ATTACK-BERT",
)

TEST_MODEL_ALIASES = ("test-hash", "hashbow-256")


class EncoderError(Exception):
    """The requested model cannot be loaded."""


class HashedBagOfWordsEncoder:
    """Deterministic no-download encoder for protocol and cache tests.

    Same construction as the main package's test provider: sha256-hashed
    token buckets, L2-normalized, float32.
    """

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self.model_id = f"hashbow-{dimension}"

    def encode(self, text: str) -> np.ndarray:
        tokens = re.findall(r"\w+", text.lower()) or [text]
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            counts[int.from_bytes(digest[:8], "little") % self.dimension] += 1.0
        norm = np.linalg.norm(counts)
        if norm > 0:
            counts /= norm
        return counts.astype(np.float32)


class SentenceTransformerEncoder:
    """Wraps a sentence-transformers model in inference mode."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                "sentence-transformers is not installed; "
                "install the worker with the [models] extra"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:  # model download/load failures vary widely
            raise EncoderError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model_id = model_id
        dimension = self._model.get_sentence_embedding_dimension()
        if not dimension or dimension <= 0:
            raise EncoderError(f"model {model_id!r} reports no embedding dimension")
        self.dimension = int(dimension)

    def encode(self, text: str) -> np.ndarray:
        vector = self._model.encode(
            text,
            convert_to_numpy=True,
            normalize_embeddings=False,
            show_progress_bar=False,
        )
        return np.asarray(vector, dtype=np.float32)


def create_encoder(model_id: str):
    """Instantiate the encoder for a model id.

    "test-hash"/"hashbow-256" resolve to the deterministic test encoder;
    anything else is treated as a sentence-transformers model id.
    """
    if model_id in TEST_MODEL_ALIASES:
        return HashedBagOfWordsEncoder()
    if not model_id:
        raise EncoderError("no model id given")
    return SentenceTransformerEncoder(model_id)
