"""Exception types shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and every
:class:`NumericalFailure` to exit code 3.
"""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class InsufficientQuadratureError(ValueError):
    """The quadrature rule cannot resolve the requested spectral levels."""


class UnboundedMultiplierError(ValueError):
    """A spectral multiplier is not finite on the truncated spectrum."""


class SupportViolationError(ValueError):
    """A function is nonzero outside its declared support."""


class NumericalFailure(ArithmeticError):
    """An iterative or adaptive computation failed to reach its tolerance."""


class ConvergenceError(NumericalFailure):
    pass
