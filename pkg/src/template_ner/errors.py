"""Exception types shared across the package."""


class TemplateNerError(Exception):
    """Base class for all errors raised by this package."""


class ConllParseError(TemplateNerError):
    """Malformed CoNLL input. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class BioError(TemplateNerError):
    """Invalid BIO tag or tag transition."""


class TemplateError(TemplateNerError):
    """Bad template pattern, label-word map, or fill request."""


class ScorerError(TemplateNerError):
    """Scoring or training failure (bad model state, divergence, backend error)."""


class TransportError(TemplateNerError):
    """External scorer endpoint unreachable, closed, or timed out."""


class ProtocolError(TemplateNerError):
    """External scorer spoke the wire protocol incorrectly."""
