"""Exception types shared across the package.

Validation problems (bad inputs, malformed files) and numerical failures
are kept in separate branches so the CLI can map them to distinct exit
codes.
"""


class QoctError(Exception):
    """Base class for all package errors."""


class ValidationError(QoctError):
    """Invalid user input: bad parameter values or malformed files."""


class InvalidInterfaceError(ValidationError):
    """Amplitude reflectivity outside (-1, 1)."""


class GainNotSupportedError(ValidationError):
    """Negative loss exponent (gain media are not modeled)."""


class UnsupportedProfileError(ValidationError):
    """Operation requires a Gaussian spectral profile."""


class DegeneratePairError(ValidationError):
    """Artifact pair with zero delay separation."""


class SampleSpecError(ValidationError):
    """Malformed or schema-violating sample specification file."""


class TraceFileError(ValidationError):
    """Malformed interferogram trace file."""


class NumericalError(QoctError):
    """Numerical failure during a computation."""


class SingularStackError(NumericalError):
    """Transfer-matrix D entry vanished; stack has no defined reflection."""


class QuadratureResolutionError(NumericalError):
    """Frequency grid too coarse to resolve the fastest delay phase."""
