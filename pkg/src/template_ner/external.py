"""Client for external scorer processes speaking the line protocol.

Framing: UTF-8 JSON records, one per line. The server opens with a
handshake line `{"hello":1,"protocol_version":1}`, then answers every
request `{"id":N,"src":[...],"tgt":[...],"protocol_version":1}` with exactly
one `{"id":N,"token_logprobs":[...]}` line (or `{"id":N,"error":"..."}`).
Responses may arrive in any order; this client correlates them by id.

Endpoints are either `tcp://host:port` or a command line to spawn with
pipes on stdin/stdout.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import socket
import subprocess
import time
from typing import Sequence

from .errors import ProtocolError, ScorerError, TransportError
from .scorer import TargetScore

PROTOCOL_VERSION = 1
ENDPOINT_ENV_VAR = "TEMPLATE_NER_SCORER_ENDPOINT"


def encode_request(req_id: int, src: Sequence[str], tgt: Sequence[str]) -> str:
    return json.dumps(
        {
            "id": req_id,
            "src": list(src),
            "tgt": list(tgt),
            "protocol_version": PROTOCOL_VERSION,
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


class _PipeChannel:
    """Line transport over a spawned subprocess's stdin/stdout."""

    def __init__(self, command: str):
        self.describe = command
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise TransportError(f"cannot start scorer {command!r}: {exc}") from exc
        self._buf = b""

    def send_line(self, line: str) -> None:
        try:
            self._proc.stdin.write(line.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"scorer {self.describe!r} closed stdin: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TransportError(f"timeout waiting for scorer {self.describe!r}")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise TransportError(f"timeout waiting for scorer {self.describe!r}")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise TransportError(f"scorer {self.describe!r} closed the connection")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode("utf-8")

    def close(self) -> None:
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class _SocketChannel:
    """Line transport over a TCP connection."""

    def __init__(self, hostport: str):
        self.describe = f"tcp://{hostport}"
        host, _, port = hostport.rpartition(":")
        try:
            self._sock = socket.create_connection((host, int(port)), timeout=10)
        except (OSError, ValueError) as exc:
            raise TransportError(f"cannot connect to scorer {self.describe}: {exc}") from exc
        self._buf = b""

    def send_line(self, line: str) -> None:
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            raise TransportError(f"scorer {self.describe} send failed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TransportError(f"timeout waiting for scorer {self.describe}")
            self._sock.settimeout(remaining)
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout:
                raise TransportError(f"timeout waiting for scorer {self.describe}") from None
            except OSError as exc:
                raise TransportError(f"scorer {self.describe} recv failed: {exc}") from exc
            if not chunk:
                raise TransportError(f"scorer {self.describe} closed the connection")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode("utf-8")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class ExternalScorer:
    """GenerativeScorer backed by an external process or socket endpoint.

    At most max_in_flight requests are outstanding at a time so large
    batches cannot deadlock on pipe buffers. A protocol or scorer error
    closes the channel; the next call reconnects from a clean state.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, max_in_flight: int = 64):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_in_flight = max(1, max_in_flight)
        self._channel = None
        self._next_id = 0

    def _connect(self):
        if self._channel is not None:
            return self._channel
        if self.endpoint.startswith("tcp://"):
            self._channel = _SocketChannel(self.endpoint[len("tcp://") :])
        else:
            self._channel = _PipeChannel(self.endpoint)
        hello_line = self._channel.recv_line(self.timeout)
        try:
            hello = json.loads(hello_line)
        except json.JSONDecodeError:
            raise ProtocolError(
                f"scorer {self.endpoint!r} sent a malformed handshake: {hello_line!r}"
            ) from None
        version = hello.get("protocol_version")
        if hello.get("hello") != 1 or version != PROTOCOL_VERSION:
            raise ProtocolError(
                f"scorer {self.endpoint!r} protocol version mismatch: "
                f"got {version}, need {PROTOCOL_VERSION}"
            )
        return self._channel

    def score_target(self, source: Sequence[str], target: Sequence[str]) -> TargetScore:
        [out] = self.score_targets(source, [target])
        return out

    def score_targets(
        self, source: Sequence[str], targets: Sequence[Sequence[str]]
    ) -> list[TargetScore]:
        results: list[TargetScore | None] = [None] * len(targets)
        pending: dict[int, int] = {}
        try:
            channel = self._connect()
            for i, target in enumerate(targets):
                if not list(target):
                    # Empty targets score 0 by convention; the protocol
                    # requires nonempty tgt so they never go over the wire.
                    results[i] = TargetScore([], 0.0)
                    continue
                if len(pending) >= self.max_in_flight:
                    self._receive_one(channel, pending, targets, results)
                req_id = self._next_id
                self._next_id += 1
                pending[req_id] = i
                channel.send_line(encode_request(req_id, source, target))
            while pending:
                self._receive_one(channel, pending, targets, results)
        except (ProtocolError, ScorerError, TransportError):
            # unread responses would poison the next call
            self.close()
            raise
        return results  # type: ignore[return-value]

    def _receive_one(self, channel, pending, targets, results) -> None:
        line = channel.recv_line(self.timeout)
        try:
            response = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(
                f"malformed response from {self.endpoint!r} "
                f"(awaiting ids {sorted(pending)}): {line!r}"
            ) from None
        resp_id = response.get("id")
        if resp_id not in pending:
            raise ProtocolError(
                f"response for unknown request id {resp_id!r} from {self.endpoint!r}"
            )
        if "error" in response:
            raise ScorerError(
                f"scorer error for request {resp_id}: {response['error']}"
            )
        logprobs = response.get("token_logprobs")
        idx = pending.pop(resp_id)
        if not isinstance(logprobs, list) or len(logprobs) != len(targets[idx]):
            raise ProtocolError(
                f"request {resp_id}: expected {len(targets[idx])} token_logprobs, "
                f"got {logprobs!r}"
            )
        per_token = [float(v) for v in logprobs]
        results[idx] = TargetScore(per_token, float(sum(per_token)))

    def close(self) -> None:
        if self._channel is not None:
            self._channel.close()
            self._channel = None

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
