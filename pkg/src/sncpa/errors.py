"""Exception hierarchy.

Everything raised on purpose derives from :class:`SncpaError`.  Errors that
mean "the statistic is undefined for this sample" derive from
:class:`StatisticalDegeneracy`; the CLI maps those to exit code 2.
"""


class SncpaError(Exception):
    """Base class for all package errors."""


class InputError(SncpaError, ValueError):
    """Malformed input: shapes, non-finite values, bad configuration."""


class DimensionMismatch(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class NotScalar(InputError):
    pass


class HorizonMismatch(InputError):
    """A one-step statistic was requested for a series with horizon > 1."""


class InvalidConfig(InputError):
    pass


class TooShort(InputError):
    pass


class ParseError(InputError):
    """An input file could not be read as a numeric table."""


class UnknownColumn(InputError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class StatisticalDegeneracy(SncpaError, ArithmeticError):
    """The statistic is undefined on this sample."""


class DegenerateRange(StatisticalDegeneracy):
    def __init__(self, message="adjusted range of the CUSUM path is zero", coordinate=None):
        if coordinate is not None:
            message = f"{message} (coordinate {coordinate})"
        super().__init__(message)
        self.coordinate = coordinate


class SingularNormalizer(StatisticalDegeneracy):
    pass


class DegenerateNormalizer(StatisticalDegeneracy):
    pass


class NotPositiveDefinite(StatisticalDegeneracy):
    pass


class SingularHac(StatisticalDegeneracy):
    pass


class SingularBridgeGram(StatisticalDegeneracy):
    pass


class CacheMiss(SncpaError, LookupError):
    """No cached critical-value table satisfies the request."""


class CacheVersionError(SncpaError):
    """A cache file was written by an incompatible generator version."""


class MissingCriticalValues(CacheMiss):
    pass
