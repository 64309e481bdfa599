"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid model, grid or solver configuration."""


class ShapeError(ValueError):
    """Array dimensions do not match the operator they are applied to."""


class NumericalBreakdown(ArithmeticError):
    """A solver produced non-finite values or lost positive definiteness.

    ``iteration`` records where it happened, when known.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class SingularPencilError(ArithmeticError):
    """A shifted or projected system has a (numerically) zero denominator."""


class SizeGuardError(RuntimeError):
    """Refusal to assemble a dense operator above the size guard."""


class OutOfMemoryError(MemoryError):
    """Estimated working set exceeds the configured memory budget."""

    def __init__(self, message, required_bytes=None, budget_bytes=None):
        super().__init__(message)
        self.required_bytes = required_bytes
        self.budget_bytes = budget_bytes


class MapFormatError(ValueError):
    """Malformed map file; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
