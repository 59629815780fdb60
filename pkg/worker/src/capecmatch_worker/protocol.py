"""JSON-line request/response protocol over stdin/stdout.

Handshake (one line): {"model": <id>, "dim": <n>, "proto": 1}
Request  (one line):  {"id": <str>, "text": <str>}
Response (one line):  {"id": <str>, "vector": [<float> x dim]}
Errors:               {"error": <message>, "id": <offending id or null>}

Responses are emitted in request order. An empty input line (or EOF) shuts
the loop down cleanly.
"""

from __future__ import annotations

import json
from typing import IO

PROTOCOL_VERSION = 1


def handshake_line(encoder) -> str:
    return json.dumps(
        {"model": encoder.model_id, "dim": encoder.dimension, "proto": PROTOCOL_VERSION}
    )


def error_line(message: str, request_id=None) -> str:
    return json.dumps({"error": message, "id": request_id})


def response_line(request_id: str, vector) -> str:
    return json.dumps(
        {"id": request_id, "vector": [float(value) for value in vector]}
    )


def serve(encoder, in_stream: IO[str], out_stream: IO[str]) -> int:
    """Run the request loop until an empty line or EOF; returns 0."""
    out_stream.write(handshake_line(encoder) + "\n")
    out_stream.flush()
    for line in in_stream:
        line = line.strip()
        if not line:
            break
        request_id = None
        try:
            request = json.loads(line)
            request_id = request.get("id")
            text = request["text"]
            if not isinstance(text, str):
                raise TypeError("text must be a string")
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
            out_stream.write(error_line(f"bad request: {exc}", request_id) + "\n")
            out_stream.flush()
            continue
        try:
            vector = encoder.encode(text)
        except Exception as exc:
            out_stream.write(error_line(f"encoding failed: {exc}", request_id) + "\n")
            out_stream.flush()
            continue
        out_stream.write(response_line(request_id, vector) + "\n")
        out_stream.flush()
    return 0
