"""Exception types shared across the pipeline."""


class DaylensError(Exception):
    """Base class for all pipeline errors."""


class ParseError(DaylensError):
    """Input document is malformed and cannot be parsed."""


class ValidationError(DaylensError):
    """Parsed input violates a structural invariant."""


class HeaderMismatch(DaylensError):
    """CSV header does not contain the columns the source spec declares."""


class EmptySeries(DaylensError):
    """An import produced zero valid rows."""


class EmptyInput(DaylensError):
    """An operation received an empty collection."""


class TooFewSamples(DaylensError):
    """A series has too few samples for the requested operation."""


class TooShort(DaylensError):
    """A sequence is too short for the requested lag structure."""


class TooFewRows(DaylensError):
    """Not enough rows to split or cross-validate."""


class TooLarge(DaylensError):
    """Instance exceeds the size cap of a brute-force oracle."""


class AllDropped(DaylensError):
    """Sparsity filtering removed every feature or every day."""


class ConstantInput(DaylensError):
    """A statistic is undefined because an input has zero variance."""


class LengthMismatch(DaylensError):
    """Paired vectors have different lengths."""


class OutOfRange(DaylensError):
    """A value lies outside its documented domain."""


class ConvergenceFailure(DaylensError):
    """An iterative routine hit its iteration cap before converging."""


class ModelNotFitted(DaylensError):
    """A prediction was requested from a model that is not ready."""


class ShapeMismatch(DaylensError):
    """Array shapes are inconsistent with the network or data layout."""


class InvalidSpec(DaylensError):
    """A chart spec is missing fields or names an unknown kind."""


class MissingStage(DaylensError):
    """A pipeline stage was invoked before the stage it depends on."""


class ConfigError(DaylensError):
    """Run configuration is missing or inconsistent."""
