"""Exception types shared across the package."""


class HlmrfError(Exception):
    """Base class for all errors raised by hlmrf."""


class StructureError(HlmrfError):
    """Objects that must align (indices, vector lengths) do not."""


class DataError(HlmrfError):
    """Malformed input data (bad values, duplicate atoms, arity mismatch)."""


class ModelError(HlmrfError):
    """Ill-formed rule, template or constraint definition."""


class InfeasibleModelError(ModelError):
    """The constraints admit no feasible assignment."""


class NumericsError(HlmrfError):
    """A numerical routine reached a degenerate state."""


class ParseError(HlmrfError):
    """Syntax error in a model file, with source location."""

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
