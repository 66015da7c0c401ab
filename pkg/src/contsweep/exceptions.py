"""Exception hierarchy.

The CLI maps these onto exit codes (2 input, 3 numerical/fit, 4 degenerate
quantification), so raise the most specific class available.
"""


class ContSweepError(Exception):
    """Base class for all package errors."""


class InputError(ContSweepError, ValueError):
    """Malformed or out-of-domain input."""


class NumericalError(ContSweepError, ArithmeticError):
    """A quadrature, root finder or optimizer failed to converge."""


class FitError(NumericalError):
    """Maximum likelihood fit did not converge.

    ``best`` holds the best parameters found before giving up.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class QuadratureError(NumericalError):
    """Adaptive quadrature failed on a segment ``(a, b)``."""

    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class OptimizationError(NumericalError):
    """The threshold optimizer failed; ``curve`` carries the sampled variance curve."""

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve


class DegenerateError(ContSweepError):
    """Quantification is undefined for this input (e.g. TPR == FPR)."""


class NoAdmissibleThresholdsError(DegenerateError):
    """Median Sweep found no threshold with a large enough TPR - FPR gap."""


class NoWindowError(DegenerateError):
    """No decision window exists for the requested ``p_delta``."""
