"""Paper-style figures from cohsurf metrics CSVs.  Plots only, no physics."""

__version__ = "0.1.0"

from .figures import FigureSpec, SchemaError, build_figure, render  # noqa: F401
