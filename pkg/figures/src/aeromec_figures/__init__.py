"""Figure regeneration from aeromec experiment CSV outputs."""

__version__ = "0.1.0"

from .data import FigureSpec, MissingColumnError, extract_figure_data
from .render import render

__all__ = ["FigureSpec", "MissingColumnError", "extract_figure_data", "render", "__version__"]
