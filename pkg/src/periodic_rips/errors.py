"""Exception types shared across the package.

The CLI maps these onto stable exit codes: ParseError -> 1,
ValidationError -> 2, VersionMismatchError -> 3.
"""


class ParseError(ValueError):
    """A document could not be decoded or is structurally malformed."""


class ValidationError(ValueError):
    """A decoded object violates an invariant (bad anchors, bad cutoffs, ...)."""


class VersionMismatchError(RuntimeError):
    """Feature-schema or weight-file version disagreement."""


class WeightFormatError(ValueError):
    """A weight/tensor container is unreadable or fails manifest validation."""
