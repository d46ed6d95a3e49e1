"""Trajectory-user linking with mutually distilled recurrent and attention encoders."""

from tullink.errors import ConfigError, DataError, DivergenceError, TulError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "DivergenceError", "TulError", "__version__"]
