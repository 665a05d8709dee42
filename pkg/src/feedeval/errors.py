"""Exception hierarchy shared across the package."""


class FeedEvalError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FeedEvalError):
    """A value violates a domain invariant (bad trait, score out of range, ...)."""


class IngestionError(FeedEvalError):
    """A source row or record could not be parsed into a domain object."""


class RenderError(FeedEvalError):
    """A prompt could not be rendered (missing rubric, missing score)."""


class TransportError(FeedEvalError):
    """A retryable endpoint failure (timeout, connection error, HTTP >= 500)."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class ProtocolError(FeedEvalError):
    """A permanent endpoint failure: 4xx status or a malformed response body."""


class ExtractionFormatError(FeedEvalError):
    """A backend extraction response could not be parsed into essay segments."""


class UndefinedAgreementError(FeedEvalError):
    """An agreement statistic is undefined for the given data (zero denominator)."""


class EmissionError(FeedEvalError):
    """A dataset or label file could not be written completely."""
