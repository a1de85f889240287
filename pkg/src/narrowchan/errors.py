"""Exception types shared across the package."""


class NarrowChanError(Exception):
    """Base class for package errors."""


class ParameterError(NarrowChanError, ValueError):
    """Inconsistent or out-of-range parameters."""


class RangeError(ParameterError):
    """A coordinate lies outside the simulation window."""


class GeometryError(NarrowChanError, ValueError):
    """A point or shape violates the channel geometry."""


class ConstructionError(GeometryError):
    """A channel cannot be turned into a metric graph."""


class InsufficientSampleError(ParameterError):
    """Sample too short for the requested estimator."""


class DivergenceError(ParameterError):
    """The requested integral or expectation diverges."""


class PreconditionError(NarrowChanError, ValueError):
    """A documented precondition does not hold."""


class SimulationFault(NarrowChanError, RuntimeError):
    """A Monte Carlo path reached a non-finite or otherwise invalid state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StepTooLargeError(SimulationFault):
    """Displacement exceeds the channel width; shrink dt."""


class SingularSystemError(NarrowChanError, RuntimeError):
    """The finite-volume system could not be solved."""


class OutputError(NarrowChanError, OSError):
    """Results could not be written."""
