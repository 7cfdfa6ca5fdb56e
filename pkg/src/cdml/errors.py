"""Exception types shared across the package."""


class CdmlError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(CdmlError):
    """A required column is missing or the column-role map is inconsistent."""


class FoldError(CdmlError):
    """Fold structure is invalid (empty fold, too many folds, bad labels)."""


class BoundsError(CdmlError):
    """An interval constraint [lo, hi] is empty or inverted."""


class LearnerError(CdmlError):
    """A nuisance learner could not be fit or evaluated."""


class DegenerateFoldError(CdmlError):
    """A cross-fitting training set is missing a treatment arm."""


class DegenerateArmError(CdmlError):
    """A calibration step requires observations from an absent arm."""


class BootstrapError(CdmlError):
    """Too many bootstrap replicates were degenerate."""
