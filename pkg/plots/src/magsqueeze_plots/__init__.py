"""Figure rendering for magsqueeze CSV outputs."""

from .render import KINDS, PlotError, PlotSpec, build_figure, load_csv, render

__version__ = "0.1.0"
