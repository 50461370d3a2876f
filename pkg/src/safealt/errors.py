"""Exception hierarchy shared by all safealt modules."""


class SafealtError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(SafealtError):
    """A config file or spec object violates its schema or invariants."""


class OutOfDomainError(SafealtError):
    """A query point left the gridded domain and the caller forbade clamping."""


class NonConvergenceError(SafealtError):
    """Value iteration hit its sweep budget with the residual still above tolerance."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"no convergence after {iterations} sweeps; residual {residual:.3e}"
        )
        self.residual = residual
        self.iterations = iterations


class ExhaustedSamplingError(SafealtError):
    """Rejection sampling fell below its acceptance-rate floor."""


class DivergedLossError(SafealtError):
    """Training loss became non-finite."""


class IoError(SafealtError):
    """File could not be read or written."""


class FormatVersionMismatchError(SafealtError):
    """Binary artifact carries an unknown magic/version header."""


class ChecksumMismatchError(SafealtError):
    """Binary artifact payload is truncated or corrupt."""


class KindMismatchError(SafealtError):
    """Two goal values of different kinds were combined."""


class MissingEmbeddingError(SafealtError):
    """Embedding table has no entry for the requested (goal, intent) key."""


class UntrainedIntentError(SafealtError):
    """Encoder was never trained for the requested intent."""


class SetMismatchError(SafealtError):
    """Two ranked lists do not cover the same underlying set."""


class TooSmallError(SafealtError):
    """Ranked list too short for a pairwise metric."""


class TransportError(SafealtError):
    """Chat-completion endpoint unreachable or returned a transport-level failure."""


class RateLimitedError(SafealtError):
    """Chat-completion endpoint rate-limited the request."""

    def __init__(self, retry_after: float | None):
        super().__init__(f"rate limited (retry after {retry_after})")
        self.retry_after = retry_after


class MalformedReplyError(SafealtError):
    """Chat-completion reply could not be parsed into a valid ranking."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text
