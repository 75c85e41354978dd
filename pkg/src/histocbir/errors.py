"""Exception hierarchy. Every failure mode callers may need to distinguish
gets its own class; nothing is silently coerced to a sentinel value."""


class HistoCbirError(Exception):
    """Base class for all errors raised by this package."""


# --- imaging ---

class ImageIOError(HistoCbirError):
    """File missing or unreadable."""


class ImageFormatError(HistoCbirError):
    """Decodable file but unsupported bit depth or channel count."""


class ChannelError(HistoCbirError):
    """Operation applied to an image with the wrong number of channels."""


# --- stain separation ---

class InsufficientTissueError(HistoCbirError):
    """Too few pixels above the optical-density threshold to estimate a basis."""


class DegenerateWedgeError(HistoCbirError):
    """Wedge extremes nearly collinear: single-stain or monochrome input."""


# --- descriptors ---

class ImageTooSmallError(HistoCbirError):
    """Image smaller than the descriptor's minimum supported size."""


# --- distances ---

class LengthMismatchError(HistoCbirError):
    """Paired vectors of different lengths."""


class UndefinedDistanceError(HistoCbirError):
    """Distance undefined for these inputs (zero vector for cosine,
    constant vector for correlation)."""


class ZeroMassError(HistoCbirError):
    """Transport distance on a histogram with zero total mass."""


# --- retrieval ---

class EmptyTrainingSetError(HistoCbirError):
    """Index built from no samples."""


class HeterogeneousDescriptorsError(HistoCbirError):
    """Index samples disagree on descriptor kind, mode, or length."""


class KOutOfRangeError(HistoCbirError):
    """Requested neighbour count outside [1, index size]."""


class DegenerateQueryError(HistoCbirError):
    """Undefined-distance exclusions left fewer than k candidates."""


class EmptyNeighborListError(HistoCbirError):
    """Classification from an empty neighbour list."""


# --- datasets ---

class ManifestParseError(HistoCbirError):
    """Filename or manifest row does not match the expected grammar."""


class EmptyDatasetError(HistoCbirError):
    """Ingestion produced no usable rows."""


class UnknownPatientError(HistoCbirError):
    """Fold file references a patient absent from the manifest."""


class InfeasibleSplitError(HistoCbirError):
    """Requested split cannot be realised (too few patients, overlap, ...)."""


# --- evaluation ---

class UndefinedMetricError(HistoCbirError):
    """Metric denominator empty (e.g. BAC with no positive-class samples)."""


class EmptyInputError(HistoCbirError):
    """Evaluation called on empty prediction lists."""


class EmptyGroupError(HistoCbirError):
    """Best-over-distances on an empty record group."""


class IncompleteTrialError(HistoCbirError):
    """Distance ranking requires every distance in every trial."""


# --- pipeline / CLI ---

class ConfigError(HistoCbirError):
    """Invalid run configuration (unknown token, bad path, empty list)."""
