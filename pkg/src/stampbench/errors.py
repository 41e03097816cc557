"""Exception hierarchy shared across the workbench.

The CLI maps these onto exit codes: DataError -> 1, ConfigError -> 2.
"""


class StampBenchError(Exception):
    """Base class for all workbench errors."""


class ConfigError(StampBenchError):
    """Invalid configuration: bad ranges, shapes or parameter combinations."""


class DataError(StampBenchError):
    """Invalid or missing data: malformed curves, absent files, empty masks."""
