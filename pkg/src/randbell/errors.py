"""Exception types shared across the package."""


class NumericalConsistencyError(RuntimeError):
    """A computed quantity failed an internal consistency check.

    Raised when a probability carries an imaginary residue above tolerance,
    falls outside [0, 1] beyond tolerance, or a table fails its normalization
    or no-signaling cross-check.
    """


class NoViolationError(ValueError):
    """A required-efficiency was requested for a form that is not violated."""
