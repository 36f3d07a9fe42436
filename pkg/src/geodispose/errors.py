"""Exception hierarchy shared across the package."""


class GeodisposeError(Exception):
    """Base class for all package errors."""


class AngleAtPi(GeodisposeError):
    """SO(3) logarithm requested within tolerance of the pi singularity."""


class ParseError(GeodisposeError):
    """Malformed line in a text index/trajectory file."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class NonUnitQuaternion(GeodisposeError):
    """Quaternion norm too far from 1 to be silently renormalized."""


class EmptyAssociation(GeodisposeError):
    """Timestamp association produced zero surviving pairs."""


class DecodeError(GeodisposeError):
    """Depth image bytes could not be decoded."""


class WrongBitDepth(GeodisposeError):
    """Depth image is not a 16-bit single-channel raster."""


class MissingGroundTruth(GeodisposeError):
    """A ground-truth pose was required but absent."""


class DimensionMismatch(GeodisposeError):
    """Raster dimensions disagree with camera intrinsics."""


class DegenerateSystem(GeodisposeError):
    """Normal-equation system is rank deficient / ill conditioned."""

    def __init__(self, condition_number, message="6x6 system ill conditioned"):
        self.condition_number = condition_number
        super().__init__(f"{message} (cond={condition_number:.3e})")


class ManifestParse(GeodisposeError):
    """Proposal manifest header or record is malformed."""


class MissingDepthFile(GeodisposeError):
    """Manifest references a depth raster that does not exist."""


class BadQuaternion(GeodisposeError):
    """Manifest pose quaternion norm outside tolerance."""


class MissingEntry(GeodisposeError):
    """No manifest entry for the requested frame pair."""


class DepthUnavailable(GeodisposeError):
    """Depth for a frame is not available under the selected depth mode."""


class TooFewFrames(GeodisposeError):
    """Sequence shorter than stride + 1."""


class EmptySamples(GeodisposeError):
    """Percentile of an empty sample list."""


class NoSamples(GeodisposeError):
    """Summary requested but the inclusion policy left zero samples."""
