"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class InfeasibleManeuverError(ValueError):
    """A maneuver boundary pair violates a vehicle bound; the message names it."""


class ConvergenceError(RuntimeError):
    """The maneuver solver hit its iteration cap; carries the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class AutomatonFormatError(ValueError):
    """An automaton file could not be parsed; the message carries field context."""


class AutomatonIntegrityError(ValueError):
    """A loaded automaton failed revalidation."""


class ConfigError(ValueError):
    """A subgraph or planner configuration is invalid against its automaton."""


class InfeasiblePlanError(RuntimeError):
    """No collision-free plan with a valid terminal certificate exists."""


class ExpansionCapError(RuntimeError):
    """The search exceeded its expansion cap; carries stats for diagnosis."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class ScenarioError(ValueError):
    """A scenario file failed parsing or validation."""
