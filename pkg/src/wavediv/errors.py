"""Exception and warning types raised by wavediv."""


class WaveDivError(Exception):
    """Base class for all library errors."""


class MalformedFilterError(WaveDivError, ValueError):
    """The low-pass taps do not define a compactly supported scaling function."""


class EmptyDomainError(WaveDivError, ValueError):
    """Two densities share no region carrying enough mass to compare them."""


class QuadratureError(WaveDivError, ArithmeticError):
    """A quadrature produced a non-finite value or failed its error check."""


class InfiniteDivergenceError(WaveDivError, ArithmeticError):
    """A closed-form integral diverges for the requested parameters."""


class UnsupportedPairError(WaveDivError, NotImplementedError):
    """No closed form is implemented for this distribution pair and kind."""


class DegenerateVarianceError(WaveDivError, ArithmeticError):
    """The asymptotic variance is zero, so the normal approximation carries no information."""


class QuadratureResolutionWarning(UserWarning):
    """The quadrature grid is coarser than the wavelet scale it integrates."""
