"""Bridge from trained image classifiers to HFV1 embedding files."""

from .export import (
    ExportError,
    ExportManifest,
    ExportReport,
    export_features,
    penultimate_extractor,
)
from .hfv1 import write_hfv1

__version__ = "0.1.0"
