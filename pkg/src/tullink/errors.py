class TulError(Exception):
    """Base class for all package errors. ``exit_code`` is what the CLI returns."""

    exit_code = 1


class ConfigError(TulError):
    exit_code = 1


class DataError(TulError):
    exit_code = 2


class DivergenceError(TulError):
    exit_code = 3
