"""Exception types shared across the package."""


class IsacFlError(Exception):
    """Base class for all package-specific errors."""


class SnapshotTooLong(IsacFlError):
    """Snapshot accumulation does not fit inside the sensing stage."""


class DelayExhausted(IsacFlError):
    """Local training already consumes the whole round delay budget."""


class DegenerateInterval(IsacFlError):
    """Search interval for the minimum sensing SNR is empty."""


class AllInfeasible(IsacFlError):
    """No device admits a feasible allocation."""


class ZeroEffectiveData(IsacFlError):
    """Sum of success-weighted sample counts is zero."""


class InsufficientData(IsacFlError):
    """Dataset too small for the requested partition."""


class DimensionMismatch(IsacFlError):
    """Parameter vectors of inconsistent length cannot be aggregated."""


class MalformedCSV(IsacFlError):
    """CSV input does not match the expected column layout."""


class ConfigError(IsacFlError):
    """Scenario configuration is missing fields or has invalid values."""
