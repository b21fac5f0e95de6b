"""Static figures from barsched experiment CSVs."""

from .figures import FIGURE_KINDS, FigureSpec, PlotInputError, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "PlotInputError", "render"]
