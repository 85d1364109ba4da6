"""Figure scripts over plme-lab scenario CSV outputs.

Pure rendering: all physics lives upstream; these layouts only read the CSV
schemas and draw.  Identical inputs give identical image bytes.
"""

__version__ = "0.1.0"

from .io import FigureDataError
from .layouts import FigureSpec, LAYOUTS, list_figures, render

__all__ = ["FigureDataError", "FigureSpec", "LAYOUTS", "list_figures", "render"]
