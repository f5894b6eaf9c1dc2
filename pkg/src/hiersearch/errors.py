"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration and data problems exit 2,
an empty evaluation exits 3, numerical failures exit 4.
"""


class HiersearchError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(HiersearchError):
    """A file does not conform to its declared on-disk format."""


class ValidationError(HiersearchError):
    """Data violates an invariant (dimensions, finiteness, uniqueness, labels)."""


class DimensionError(ValidationError):
    """A vector or matrix has the wrong dimension."""


class ConfigError(HiersearchError):
    """A parameter is outside its allowed range."""


class NumericalError(HiersearchError):
    """A linear-algebra step failed (for example a Cholesky factorization)."""


class EmptyResultError(HiersearchError):
    """An operation produced no usable results (for example no evaluable queries)."""
