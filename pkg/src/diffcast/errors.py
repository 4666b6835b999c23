"""Exception types shared across the package."""


class DiffcastError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DiffcastError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(DiffcastError):
    """A primitive produced or received non-finite values."""


class ContractError(DiffcastError):
    """A caller violated an operation precondition."""


class ConfigError(DiffcastError):
    """Invalid configuration value."""


class AlignmentError(DiffcastError):
    """Per-step feature streams have mismatched lengths."""


class CapacityError(DiffcastError):
    """Window exceeds the positional table capacity."""


class SchemaError(DiffcastError):
    """Unknown column, bad payload shape, or schema version mismatch."""


class DegenerateArmError(DiffcastError):
    """Treatment binarization left one arm empty."""


class UnsupportedDatasetError(DiffcastError):
    """The dataset lacks ground truth required by the requested metric."""


class ComparabilityError(DiffcastError):
    """Evaluation reports come from different datasets or splits."""


class TrainingDiverged(DiffcastError):
    """Training loss became non-finite."""
