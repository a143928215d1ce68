"""Figure rendering for gossip consensus experiment outputs."""

from .figures import FIGURE_KINDS, FigureSpec, PlotInputError, moving_average, render, smoothed_nonincreasing

__version__ = "0.1.0"
