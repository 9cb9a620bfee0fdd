"""Exception types shared across the package."""


class HCOError(Exception):
    """Base class for all simulator errors."""


class ParamError(HCOError, ValueError):
    """Out-of-range index/value, or states built on different OracleParams."""


class CapacityError(HCOError):
    """A history append was requested but no free slot is left."""


class ConsistencyError(HCOError):
    """A closed-form oracle rule was applied to an inconsistent basis state."""


class NonUnitaryError(HCOError):
    """A program step failed the unitarity check."""


class SizeError(HCOError):
    """The requested enumeration exceeds the supported size."""
