"""Exception types shared across the toolkit."""


class TypoCFError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TypoCFError):
    """Malformed input file (bad header, bad cell syntax, bad section)."""


class IntegrityError(TypoCFError):
    """Structurally valid input that violates referential constraints."""


class FormatError(TypoCFError):
    """Unreadable serialized artifact (bad magic, version, truncation)."""


class DegenerateSplitError(TypoCFError):
    """Split request that cannot produce a usable train/eval partition."""


class NoPredictionError(TypoCFError):
    """A predictor has no basis for the requested cell.

    The experiment harness treats this as a wrong answer for the cell
    rather than a failed run.
    """
