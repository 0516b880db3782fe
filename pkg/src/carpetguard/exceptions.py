"""Exception types shared across the package."""


class CarpetGuardError(Exception):
    """Base class for all package errors."""


class CounterError(CarpetGuardError, ValueError):
    """Raised when two counter snapshots cannot be differenced."""


class EmbeddingError(CarpetGuardError):
    """Raised when an embedding provider fails or misbehaves."""


class DimensionMismatch(CarpetGuardError, ValueError):
    pass


class InsufficientClassSupport(CarpetGuardError, ValueError):
    """A class has too few records for retrieval or splitting."""


class StaleIndexError(CarpetGuardError):
    """Persisted indices were built with a different embedding configuration."""


class PromptError(CarpetGuardError, ValueError):
    pass


class RemoteUnavailable(CarpetGuardError):
    """The language-model endpoint could not be reached after all retries."""


class UnparseableReply(CarpetGuardError):
    """The model reply holds no standalone 0/1 label token."""

    def __init__(self, reply):
        super().__init__(f"no standalone 0/1 token in reply: {reply!r}")
        self.reply = reply


class MitigationContractError(CarpetGuardError):
    """A classification was delivered for a port that is currently blocked."""


class UnknownPort(CarpetGuardError, KeyError):
    pass


class ReportParseError(CarpetGuardError, ValueError):
    pass
