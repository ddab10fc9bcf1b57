"""Exception hierarchy shared across remixkit."""


class RemixkitError(Exception):
    """Base class for all library errors."""


class SignalError(RemixkitError, ValueError):
    """Invalid signal input (empty, non-finite, mismatched shapes)."""


class DivergentSnr(SignalError):
    """SNR is undefined because one of the powers is zero."""


class DataError(RemixkitError):
    """Corpus, manifest, checkpoint or config content is missing or malformed."""


class NumericalAbort(RemixkitError):
    """Training produced a non-finite loss or parameter."""
