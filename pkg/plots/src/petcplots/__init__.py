"""Batch figure rendering for the simulation toolkit's run artifacts.

Consumes only the external surface of a run: the manifest JSON and the CSV
files it references.
"""

from .errors import EmptyTrace, MissingColumn, PlotsError
from .figures import FORMATS, SELECTIONS, PlotJob, render
from .manifest import RunManifest, TraceRef, load_manifest, read_csv_columns

__version__ = "0.1.0"

__all__ = [
    "EmptyTrace",
    "FORMATS",
    "MissingColumn",
    "PlotJob",
    "PlotsError",
    "RunManifest",
    "SELECTIONS",
    "TraceRef",
    "load_manifest",
    "read_csv_columns",
    "render",
]
