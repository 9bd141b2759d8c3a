"""Wire protocol for the scorer sidecar.

One UTF-8 JSON record per line. The server sends the handshake line first,
then exactly one response per request. Responses carry either
`token_logprobs` (one float per engine token of the request's tgt) or an
`error` string; a line that cannot be parsed at all is answered with id -1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

PROTOCOL_VERSION = 1
HELLO_LINE = '{"hello":1,"protocol_version":1}'

PARSE_ERROR_ID = -1


@dataclass(frozen=True)
class ScoreRequest:
    id: int
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    protocol_version: int = PROTOCOL_VERSION


class RequestError(Exception):
    """Invalid request; carries the id to blame in the error response."""

    def __init__(self, message: str, request_id: int = PARSE_ERROR_ID):
        super().__init__(message)
        self.request_id = request_id


def parse_request(line: str) -> ScoreRequest:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError:
        raise RequestError("parse") from None
    if not isinstance(raw, dict):
        raise RequestError("parse")
    request_id = raw.get("id", PARSE_ERROR_ID)
    if not isinstance(request_id, int):
        raise RequestError("parse")
    src = raw.get("src")
    tgt = raw.get("tgt")
    if (
        not isinstance(src, list)
        or not isinstance(tgt, list)
        or not all(isinstance(t, str) for t in src)
        or not all(isinstance(t, str) for t in tgt)
    ):
        raise RequestError("parse", request_id)
    if not tgt:
        raise RequestError("empty tgt", request_id)
    version = raw.get("protocol_version")
    if version != PROTOCOL_VERSION:
        raise RequestError(f"version {version}", request_id)
    return ScoreRequest(request_id, tuple(src), tuple(tgt), version)


def encode_response(request_id: int, token_logprobs: list[float]) -> str:
    return json.dumps(
        {"id": request_id, "token_logprobs": token_logprobs},
        ensure_ascii=False,
        separators=(",", ":"),
    )


def encode_error(request_id: int, message: str) -> str:
    return json.dumps(
        {"id": request_id, "error": message},
        ensure_ascii=False,
        separators=(",", ":"),
    )
