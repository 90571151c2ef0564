"""Error taxonomy for the extractor.

Everything user-facing derives from ExtractError so the CLI can catch one
type and map it to exit code 1.
"""


class ExtractError(Exception):
    """Base class for all extraction failures."""


class CheckpointMissingError(ExtractError):
    """Checkpoint path does not exist or cannot be read."""


class CheckpointLoadError(ExtractError):
    """Checkpoint exists but its tensors do not fit the model."""


class DatasetMissingError(ExtractError):
    """Dataset name unknown or its files are not present locally."""


class FormatError(ExtractError):
    """A binary artifact failed validation on write or read."""
