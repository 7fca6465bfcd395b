"""Exception hierarchy shared across modules.

The CLI maps these onto exit codes: ParameterError -> 3, SizeCapError -> 4,
invariant failures -> 2.
"""


class UgsosError(Exception):
    """Base class for all package errors."""


class ParameterError(UgsosError, ValueError):
    """Invalid or out-of-domain input (bad parameter, length mismatch, ...)."""


class SizeCapError(UgsosError):
    """A desk-scale size cap was exceeded; the operation refuses to run."""


class DegreeError(UgsosError):
    """A polynomial exceeds the degree budget of a pseudoexpectation."""


class NullEventError(UgsosError):
    """Conditioning on an event whose pseudo-probability is below the floor."""


class ConstructionError(UgsosError):
    """A numeric construction failed to meet its stated guarantees."""
