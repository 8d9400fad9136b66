"""Offline figure rendering for dhnopt trajectory artifacts."""

from .render import FigureSpec, Panel, RenderError, load_spec, render

__version__ = "0.1.0"
