"""Exception types raised across the package."""


class BinIdError(Exception):
    """Base class for all errors raised by binid."""


class DimensionMismatch(BinIdError, ValueError):
    pass


class NonpositiveDensity(BinIdError, ValueError):
    """The density infimum over the admissible interval is not positive."""


class SingularMetric(BinIdError, ValueError):
    pass


class NotSymmetric(BinIdError, ValueError):
    pass


class InvalidConfig(BinIdError, ValueError):
    pass


class NonFiniteInput(BinIdError, ValueError):
    pass


class ConfigError(BinIdError, ValueError):
    """Parse or semantic failure of an experiment config file."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
