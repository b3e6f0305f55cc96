from typing import Optional


class NuaError(Exception):
    """Base class for every error raised by the load balancing engine."""


class ScenarioError(NuaError, ValueError):
    """Invalid generation parameters or scenario content."""


class DomainError(NuaError, ValueError):
    """An argument lies outside the domain of the operation."""


class SaturationError(NuaError, ArithmeticError):
    """A queue load reached or exceeded its stability limit."""

    def __init__(self, message: str, bs_id: Optional[int] = None, load: Optional[float] = None):
        super().__init__(message)
        self.bs_id = bs_id
        self.load = load


class InfeasibleAssociationError(NuaError, ValueError):
    """Association weight was put on a base station that cannot serve the point."""

    def __init__(self, point_index: int, bs_id: int):
        super().__init__(
            f"traffic point {point_index} is associated with BS {bs_id}, which has zero rate there"
        )
        self.point_index = point_index
        self.bs_id = bs_id


class UncoveredLocationError(NuaError, ValueError):
    """No base station reaches a traffic point."""

    def __init__(self, point_index: int):
        super().__init__(f"traffic point {point_index} is not covered by any BS")
        self.point_index = point_index


class StagnationError(NuaError):
    """Backtracking found no step that lowers the objective."""


class SweepError(NuaError):
    """Every value of a sweep grid was infeasible."""


class ExportError(NuaError, OSError):
    """A results file could not be written."""
