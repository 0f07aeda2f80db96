"""Exception types shared across the package.

The CLI maps ``ConfigError`` to exit code 2 and ``NumericError`` to 3.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad shapes, out-of-range parameters, unknown keys."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite or impossible quantity."""


class InputError(ValueError):
    """Data outside the declared alphabet or distribution constraints."""


class FramingError(InputError):
    """A received bit stream cannot be parsed under the codec framing."""
