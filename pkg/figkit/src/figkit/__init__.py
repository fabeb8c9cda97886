"""Figure rendering for trajtherm CSV bundles (no engine access)."""

from .figures import FIGURE_IDS, FigureSpec, render
from .schema import COLUMNS, HEADER_HASHES, EmptyBundle, MissingColumn, SchemaMismatch

__version__ = "0.1.0"

__all__ = [
    "COLUMNS",
    "FIGURE_IDS",
    "FigureSpec",
    "HEADER_HASHES",
    "EmptyBundle",
    "MissingColumn",
    "SchemaMismatch",
    "render",
]
