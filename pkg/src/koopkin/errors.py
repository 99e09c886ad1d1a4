"""Exception types shared across the package."""


class DataError(ValueError):
    """Input data is malformed or unusable (bad files, no pairs at a lag)."""


class NumericalError(RuntimeError):
    """An estimator could not produce a well-defined result."""
