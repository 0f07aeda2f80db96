"""Desk-scale models of semantic and goal-oriented communication."""

__version__ = "0.1.0"

from .errors import ConfigError, FramingError, InputError, NumericError  # noqa: E402

__all__ = ["ConfigError", "FramingError", "InputError", "NumericError", "__version__"]
