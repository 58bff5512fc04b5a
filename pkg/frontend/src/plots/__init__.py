"""Figure rendering for the simulation toolkit's CSV artifacts.

This package consumes only CSV files produced by the simulation CLI (it never
recomputes statistics) and renders the standard convergence figures: error
ladders, plateau curves, conditional-mass histograms against the unit
exponential, and ratio curves with a reference constant.
"""

from plots import constants, figspec, render
from plots.figspec import FigureSpec, SpecError, load_figure_spec
from plots.render import SchemaError
from plots.render import render as render_figure

__all__ = [
    "constants",
    "figspec",
    "render",
    "FigureSpec",
    "SpecError",
    "SchemaError",
    "load_figure_spec",
    "render_figure",
]
