from typing import List, Optional


class SimulationError(Exception):
    """Base class for every failure raised by the simulation library."""


class ParameterError(SimulationError, ValueError):
    """A physical parameter or operator input violates its invariant."""


class ConfigError(SimulationError):
    """A run configuration or environment setting could not be used."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        return base + "\n" + "\n".join(f"  - {d}" for d in self.diagnostics)


class DegenerateSteadyStateError(SimulationError):
    def __init__(self, kernel_dimension: int, tolerance: float):
        super().__init__(
            f"Liouvillian kernel has dimension {kernel_dimension} "
            f"(singular values below {tolerance:g}); steady state is not unique"
        )
        self.kernel_dimension = kernel_dimension
        self.tolerance = tolerance


class UndefinedRegimeError(SimulationError):
    """An analytic formula was evaluated outside the regime where it holds."""


class NumericalError(SimulationError):
    """A solver result failed its residual or convergence check."""
