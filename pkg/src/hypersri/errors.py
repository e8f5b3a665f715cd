"""Exception types shared across the pipeline.

Two branches matter for the CLI: `ValidationError` (bad inputs or violated
preconditions, exit code 1) and `RuntimeFailure` (errors arising
mid-computation, exit code 2).
"""


class SriError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SriError):
    """Input or precondition violation."""


class RuntimeFailure(SriError):
    """Failure that occurs after inputs were accepted."""


class ZeroDenominator(ValidationError):
    pass


class EmptyWindow(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class MissingParticipantData(ValidationError):
    pass


class EmptySequence(ValidationError):
    pass


class MismatchedDimensions(ValidationError):
    pass


class EmptyStoryboard(ValidationError):
    pass


class TooFewVertices(ValidationError):
    pass


class ZeroDegreeVertex(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class EmptyVideoGroup(ValidationError):
    pass


class TokenOutOfVocab(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class Empty(ValidationError):
    pass


class FormatError(ValidationError):
    """Malformed file contents (CSV/JSON/binary)."""


class DivergenceDetected(RuntimeFailure):
    """Training loss became non-finite."""


class DegenerateFeaturesWarning(UserWarning):
    """All feature vectors coincide; neighbor choice is index-only."""
