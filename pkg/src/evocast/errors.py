"""Exception hierarchy with stable machine-parsable codes.

Every CLI failure prints exactly one line: ``error: <code>: <message>``.
"""


class EvocastError(Exception):
    """Base class; subclasses override ``code``."""

    code = "internal"

    def one_line(self) -> str:
        msg = " ".join(str(self).split())
        return f"error: {self.code}: {msg}"


class ParseError(EvocastError):
    code = "parse"


class VocabularyError(EvocastError):
    code = "vocabulary"


class RangeError(EvocastError):
    code = "range"


class ShapeError(EvocastError):
    code = "shape"


class ConfigError(EvocastError):
    code = "config"


class DegenerateInputError(EvocastError):
    code = "degenerate-input"


class DataError(EvocastError):
    code = "data"


class DivergenceError(EvocastError):
    code = "divergence"


class IoError(EvocastError):
    code = "io"
