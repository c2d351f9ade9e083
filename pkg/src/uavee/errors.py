"""Exception types shared across the package."""


class UaveeError(Exception):
    """Base class for all errors raised by this package."""


class ScenarioError(UaveeError, ValueError):
    """A scenario file failed to parse or violated an invariant."""


class InfeasibleTrajectoryError(UaveeError, ValueError):
    """No trajectory satisfying the mobility constraints exists (or was given)."""


class PropulsionDomainError(UaveeError, ValueError):
    """Propulsion power requested at zero speed, where the model diverges."""

    def __init__(self, msg, slot=None):
        super().__init__(msg)
        self.slot = slot


class SolverError(UaveeError, RuntimeError):
    """The convex subproblem solver did not return an optimal point."""


class MonotonicityError(UaveeError, RuntimeError):
    """An objective sequence decreased beyond tolerance; signals a bug."""
