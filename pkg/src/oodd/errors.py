"""Exception hierarchy shared by every module in the package.

All domain failures derive from OoddError so callers (and the CLI) can
catch one base class and turn it into a diagnostic instead of a traceback.
"""


class OoddError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------- file store


class IoFailureError(OoddError):
    """Underlying OS-level read or write failed."""


class BadMagicError(OoddError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(OoddError):
    """File declares a format version or dtype code we do not speak."""


class TruncatedPayloadError(OoddError):
    """File ends before the header-declared payload is complete."""


class DimensionMismatchError(OoddError):
    """Shapes declared or supplied do not agree (dim, row count, M)."""


class NonFiniteValueError(OoddError):
    """A NaN or Inf showed up where only finite values are allowed."""


class ZeroNormError(OoddError):
    """Vector with (near-)zero L2 norm cannot be normalized."""


class OutOfRangeError(OoddError):
    """Numeric value outside its documented valid range."""


# -------------------------------------------------------- dictionary building


class EmptyClassError(OoddError):
    """A class label is present but has no samples to select from."""


class InvalidAlphaError(OoddError):
    """Inlier keep-percentage outside (0, 100]."""


class InvalidBetaError(OoddError):
    """Outlier keep-percentage outside (0, 100]."""


class InsufficientOutliersError(OoddError):
    """Outlier pool too small to fill the memory bank and queue seed."""


# ------------------------------------------------------------------- scoring


class EmptyKeysError(OoddError):
    """Scoring against an empty key matrix where that is not allowed."""


class EmptyScoresError(OoddError):
    """Metric computation needs at least one score on each side."""


class EmptyGridError(OoddError):
    """Hyperparameter search called with no candidate values."""


# -------------------------------------------------------------------- stream


class SourceTooSmallError(OoddError):
    """A stream segment asks for more rows than its source file holds."""


class ConfigError(OoddError):
    """Run configuration file is malformed or inconsistent."""


# --------------------------------------------------------------------- bench


class EquivalenceViolationError(OoddError):
    """Cosine and Euclidean retrieval paths disagreed on a neighbor set."""
