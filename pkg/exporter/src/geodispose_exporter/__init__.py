"""Producer side of the proposal interchange: manifests + GDDF rasters.

Standalone companion to the geodispose pipeline. It shares no code with the
consumer — only the file formats and the documented pose-perturbation
arithmetic, which `se3` reproduces bit-for-bit.
"""

from .export import GT_SYNTH, ExportJob, export
from .tum import ExportError
from .verify import VerifyReport, verify

__version__ = "0.1.0"

__all__ = ["GT_SYNTH", "ExportJob", "export", "ExportError",
           "VerifyReport", "verify", "__version__"]
