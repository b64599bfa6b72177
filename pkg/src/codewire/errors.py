"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CodewireError(Exception):
    """Base class for every error raised by codewire."""


class InputError(CodewireError):
    """Bad user input: undecodable source, malformed corpus, bad stub file."""


class MarkerError(InputError):
    """The ``<start>``/``<end>`` control tokens are missing, duplicated or misplaced."""


class ConfigError(CodewireError):
    pass


class UnknownClassError(CodewireError):
    """Raised by ``get_method_names`` for a class absent from the class index."""

    def __init__(self, class_name: str) -> None:
        super().__init__(f"class {class_name!r} is not in the class index")
        self.class_name = class_name


class MalformedActionError(CodewireError):
    """Model output could not be repaired into a ``{thought, action, action_input}`` object."""

    def __init__(self, message: str, raw: str = "") -> None:
        super().__init__(message)
        self.raw = raw


class UnknownToolError(CodewireError):
    pass


class TransportError(CodewireError):
    """A chat-completion round trip failed.

    ``retryable`` tells the retry wrapper whether another attempt makes sense;
    ``attempts`` is filled in once the wrapper gives up.
    """

    def __init__(self, message: str, *, retryable: bool = True, status: int | None = None) -> None:
        super().__init__(message)
        self.retryable = retryable
        self.status = status
        self.attempts = 0


class StaleEditError(CodewireError):
    pass


class InternalError(CodewireError):
    """An invariant of the pipeline itself was violated."""
