"""Exception and warning types raised by the library."""


class DistillError(Exception):
    """Base class for library errors."""


class InvalidStateError(DistillError, ValueError):
    """A matrix that should be a density matrix is not one."""


class InvalidParameterError(DistillError, ValueError):
    pass


class NotMixingError(DistillError):
    """The map has a degenerate eigenvalue 1, so no unique fixed point exists."""


class NumericalFailure(DistillError, ArithmeticError):
    """An eigensolver or fixed-point extraction failed its residual checks."""


class FidelityFormulaError(DistillError, ArithmeticError):
    """fidelity formula inapplicable (degenerate population dynamics)"""


class ResonantShakingWarning(UserWarning):
    """Off-resonant momentum sits on a resonance, so shaking cannot feed the singlet."""
