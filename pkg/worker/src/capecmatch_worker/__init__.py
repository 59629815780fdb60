"""Embedding worker for capecmatch.

Hosts sentence encoders (sentence-transformers models, plus a deterministic
hashed bag-of-words encoder for tests) behind a JSON-line stdin/stdout
protocol, and writes TLEC1 vector caches readable by the main package.
"""

from .encoders import EncoderError, HashedBagOfWordsEncoder, create_encoder

__version__ = "0.1.0"

__all__ = ["EncoderError", "HashedBagOfWordsEncoder", "create_encoder"]
