"""Exception hierarchy shared across the package."""


class PermrankError(Exception):
    """Base class for all permrank errors."""


class ConfigError(PermrankError):
    """Invalid analysis configuration (unknown statistic, bad plan, ...)."""


class DataError(PermrankError):
    """Invalid or inconsistent input data."""


class DegenerateAnalysisError(PermrankError):
    """Analysis cannot proceed: every partial test is non-informative."""
