import logging
import warnings

logger = logging.getLogger(__name__)


class SpectralError(Exception):
    """Base class for every error raised by the elastic N-P toolkit"""


class DomainError(SpectralError, ValueError):
    """Degree, order, radius or loss parameter outside its admissible range"""


class SingularityError(SpectralError, ValueError):
    """A kernel was evaluated at a coincident point or at the origin"""


class SingularParameterError(SpectralError, ValueError):
    """A Lamé-derived constant has a vanishing denominator"""


class ExactResonanceError(SpectralError, ArithmeticError):
    """The 2x2 mode system is exactly singular (D = 0)"""


class NonEigenfunctionError(SpectralError, ArithmeticError):
    """A quadrature projection left a residual above tolerance"""


class ConfigError(SpectralError, ValueError):
    """Bad command-line or config-file input"""


class AccuracyWarning(UserWarning):
    """Quadrature or series resolution is too low for the requested accuracy"""


class ConditioningWarning(UserWarning):
    """A finite-difference step is small enough for roundoff to dominate"""


def warn(message: str, category: type = AccuracyWarning):
    """Log and emit a warning in one place"""
    logger.warning(message)
    warnings.warn(message, category, stacklevel=3)
