"""Offline figure generation from training-run artifacts.

Reads the metric CSV stream (step,split,metric,value,seed,config_hash)
and newline-delimited JSON embedding dumps; renders four figure kinds
(curve, msecurve, scatter, repmap) as deterministic PNG or SVG files.
"""

from .figures import render
from .pca import pca_top2
from .spec import KINDS, PlotSpec, SpecError, load_spec, validate_spec
from .tables import TableError, read_metrics_csv, read_records

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "PlotSpec",
    "SpecError",
    "TableError",
    "load_spec",
    "pca_top2",
    "read_metrics_csv",
    "read_records",
    "render",
    "validate_spec",
]
