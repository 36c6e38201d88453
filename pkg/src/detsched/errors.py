"""Exception types raised by detsched."""


class DetschedError(Exception):
    """Base class for all library errors."""


class InvalidArgument(DetschedError, ValueError):
    pass


class InvalidKernel(DetschedError, ValueError):
    """A matrix violates the spectral constraints of its kernel role."""


class PalmUndefined(DetschedError, ValueError):
    """Conditioning on a point whose inclusion probability is (numerically) zero."""


class NumericFailure(DetschedError, RuntimeError):
    pass


class DivergingIntegral(DetschedError, ArithmeticError):
    pass


class InfeasibleStart(DetschedError, RuntimeError):
    """The utility is -inf at every admissible starting point."""


class SizeLimit(DetschedError, ValueError):
    pass
