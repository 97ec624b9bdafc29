"""Exception types shared across the package."""


class SdddeError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(SdddeError):
    """Model file or expression is malformed (syntax or semantics)."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if col is not None:
                loc += f", col {col}"
            loc += ": "
        super().__init__(loc + message)


class DelayRangeError(SdddeError):
    """An evaluated delay left [0, tau_max]. Carries slot index and value."""

    def __init__(self, slot, value, tau_max):
        self.slot = slot
        self.value = value
        self.tau_max = tau_max
        super().__init__(
            f"delay out of range: slot {slot} evaluated to {value:.6g}, "
            f"allowed [0, {tau_max:.6g}]"
        )


class NumericalError(SdddeError):
    """A numerical procedure failed (no convergence, singularity, ...)."""


class ConvergenceError(NumericalError):
    pass


class ResonanceError(NumericalError):
    """A normal-form linear system is singular (resonant configuration)."""


class DegenerateEigenvalueError(NumericalError):
    """Critical eigenvalue is not simple / not semisimple."""
