"""figkit: figure renderer for specshape CSV outputs."""

from .errors import EmptyInputError, FigkitError, SchemaMismatchError
from .render import PLOT_KINDS, PlotSpec, render

__version__ = "0.1.0"

__all__ = [
    "EmptyInputError",
    "FigkitError",
    "PLOT_KINDS",
    "PlotSpec",
    "SchemaMismatchError",
    "render",
]
