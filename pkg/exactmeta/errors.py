"""
Exception hierarchy for exactmeta.

Every error carries the process exit code the CLI should return for it.
"""


class ExactMetaError(Exception):
    """Base class for all library errors"""
    exit_code = 3


class InputError(ExactMetaError, ValueError):
    """Malformed data, arguments or files"""
    exit_code = 2


class NumericalError(ExactMetaError):
    """A numerical procedure failed"""
    exit_code = 3


class FitError(NumericalError):
    """A maximum likelihood fit of the observed data did not converge"""


class PivotError(NumericalError):
    """No usable Monte Carlo replicate: pivot solving failed"""


class BracketError(NumericalError):
    """A root of the inverted test could not be bracketed"""


class DegenerateReplicate(NumericalError):
    """A single Monte Carlo replicate has no usable pivot or weight"""
