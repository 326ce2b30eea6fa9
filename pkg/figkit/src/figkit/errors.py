class FigkitError(Exception):
    """Base class for renderer errors."""


class SchemaMismatchError(FigkitError):
    """Input CSV lacks a referenced column; the message names it."""


class EmptyInputError(FigkitError):
    """Input CSV parsed but contained no usable rows."""
