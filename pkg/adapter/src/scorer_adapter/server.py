"""Serve loop and batch scoring.

The loop reads one request per line until end-of-input and writes exactly
one response line per request. Malformed requests get an error response
(id -1 when the line was unparseable); backend failures get an error
response with the request's id and the connection stays alive.
"""

from __future__ import annotations

import socket
from typing import IO, Iterable, Sequence

from .backends import ScoringBackend
from .protocol import (
    HELLO_LINE,
    RequestError,
    ScoreRequest,
    encode_error,
    encode_response,
    parse_request,
)


def score_batch(
    backend: ScoringBackend, requests: Sequence[ScoreRequest]
) -> list[str]:
    """Response lines for a batch of parsed requests (request order)."""
    responses = []
    for request in requests:
        try:
            logprobs = backend.score(request.src, request.tgt)
            if len(logprobs) != len(request.tgt):
                raise ValueError(
                    f"backend returned {len(logprobs)} values for "
                    f"{len(request.tgt)} tokens"
                )
            responses.append(encode_response(request.id, logprobs))
        except Exception as exc:  # backend failure must not kill the loop
            responses.append(encode_error(request.id, f"backend: {exc}"))
    return responses


def serve(backend: ScoringBackend, in_stream: Iterable[str], out_stream: IO[str]) -> int:
    """Run until end-of-input; returns the number of requests handled."""
    out_stream.write(HELLO_LINE + "\n")
    out_stream.flush()
    handled = 0
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        handled += 1
        try:
            request = parse_request(line)
        except RequestError as exc:
            out_stream.write(encode_error(exc.request_id, str(exc)) + "\n")
            out_stream.flush()
            continue
        [response] = score_batch(backend, [request])
        out_stream.write(response + "\n")
        out_stream.flush()
    return handled


def serve_socket(backend: ScoringBackend, host: str, port: int) -> None:
    """Accept one connection and serve it with the same framing."""
    with socket.create_server((host, port)) as server:
        conn, _ = server.accept()
        with conn:
            stream = conn.makefile("rw", encoding="utf-8", newline="\n")
            serve(backend, stream, stream)
