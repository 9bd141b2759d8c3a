"""Sidecar scorer for the template-ner engine.

Wraps a scoring backend (an exported built-in model, or a pretrained
subword seq2seq language model) behind the newline-delimited JSON protocol
the engine's external-scorer client speaks.
"""

from .backends import LoopbackBackend, ScoringBackend, SubwordSeq2SeqBackend, sum_by_group
from .protocol import (
    HELLO_LINE,
    PROTOCOL_VERSION,
    RequestError,
    ScoreRequest,
    encode_error,
    encode_response,
    parse_request,
)
from .server import score_batch, serve, serve_socket

__version__ = "0.1.0"
