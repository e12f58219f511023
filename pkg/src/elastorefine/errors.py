"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class ElastoRefineError(Exception):
    """Base class for all package errors."""


class DimensionError(ElastoRefineError, ValueError):
    """Grid shapes are too small or do not agree."""


class ParameterError(ElastoRefineError, ValueError):
    """A configuration value is out of its allowed range."""


class DegenerateStatisticsError(ElastoRefineError, ArithmeticError):
    """A statistic is undefined for the given data (empty support, zero variance, ...)."""


class FormatError(ElastoRefineError, ValueError):
    """A file does not follow its declared binary/text layout."""

    def __init__(self, message: str, offset: int | None = None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
