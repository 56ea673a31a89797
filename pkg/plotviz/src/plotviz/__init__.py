"""Deterministic rendering of stretchpoly JSON/CSV data files."""

from .jobs import PlotJob, SchemaError, load_json, load_trace
from .render import render

__version__ = '0.1.0'
__all__ = ['PlotJob', 'SchemaError', 'render', 'load_json', 'load_trace']
