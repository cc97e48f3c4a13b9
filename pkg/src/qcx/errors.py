"""Exception types shared across the toolkit."""


class ParameterRangeError(ValueError):
    """A structural parameter is outside its admissible range."""


class SingularPointError(ValueError):
    """Evaluation requested at a point where the kernel is not differentiable."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge within the depth limit."""


class NormalizationError(ValueError):
    """A supplied function violates the normalization its check assumes."""


class MissingGradientError(ValueError):
    """An operation that needs an analytic gradient got none."""


class BandLimitError(ValueError):
    """Requested wavenumber content exceeds the grid's dealiasing margin."""


class NonZeroMeanError(ValueError):
    """Poisson right-hand side has a nonzero grid mean."""


class DegenerateFieldError(ValueError):
    """A ratio denominator vanished; the sampled field carries no information."""


class DivergenceError(RuntimeError):
    """Energy descent fell through the configured floor without stabilizing.

    Carries the partial report assembled so far in ``report`` (may be None).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
