"""TLEC1 vector cache writer.

Layout (shared with the main package, which owns the reader):
magic b"TLEC1\n", header line `model_id<TAB>dimension<TAB>count`, then
`count` records of <u32 little-endian key length><key bytes><dimension x
float32 little-endian>.
"""

from __future__ import annotations

import json
import struct
from typing import Iterable

import numpy as np

CACHE_MAGIC = b"TLEC1\n"


def write_cache(entries: Iterable[tuple[str, np.ndarray]], model_id: str, dimension: int, path) -> int:
    vectors = [(key, np.asarray(vec, dtype="<f4")) for key, vec in entries]
    for key, vec in vectors:
        if vec.shape != (dimension,):
            raise ValueError(f"vector for {key!r} has shape {vec.shape}, want ({dimension},)")
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(f"{model_id}\t{dimension}\t{len(vectors)}\n".encode("utf-8"))
        for key, vec in vectors:
            key_bytes = key.encode("utf-8")
            fh.write(struct.pack("<I", len(key_bytes)))
            fh.write(key_bytes)
            fh.write(vec.tobytes())
    return len(vectors)


def read_texts_file(path) -> list[tuple[str, str]]:
    """Lines of {"id": ..., "text": ...} -> (id, text) pairs in file order."""
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append((str(obj["id"]), str(obj["text"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}: line {lineno}: bad texts line: {exc}") from exc
    return pairs


def write_cache_batch(texts_path, cache_path, encoder) -> int:
    """Embed every (id, text) line from texts_path into a cache file."""
    pairs = read_texts_file(texts_path)
    entries = [(key, encoder.encode(text)) for key, text in pairs]
    return write_cache(entries, encoder.model_id, encoder.dimension, cache_path)
