"""Exception hierarchy shared by all modules."""


class CapBarrierError(Exception):
    """Base class for every error raised by this package."""


class ConstructionError(CapBarrierError, ValueError):
    """A curve, table or derived object could not be built from its inputs."""


class NoOverlapError(CapBarrierError, ValueError):
    """The capillary ranges of two media do not overlap (barrier case)."""


class ParameterError(CapBarrierError, ValueError):
    """A numerical parameter violates a documented bound."""


class PreconditionError(CapBarrierError, ValueError):
    """Input data do not satisfy an operation's precondition."""


class DataError(CapBarrierError, ValueError):
    """Initial or sampled data fall outside their admissible range."""


class ComparisonError(CapBarrierError, ValueError):
    """Two trajectories cannot be compared (different meshes or times)."""


class ConfigError(CapBarrierError, ValueError):
    """A scenario document violates the schema.

    ``path`` is the dotted field path of the offending entry.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class StepFailure(CapBarrierError, RuntimeError):
    """The nonlinear solve of one implicit step did not converge."""

    def __init__(self, message, time=None, dt=None, diagnostics=None):
        self.time = time
        self.dt = dt
        self.diagnostics = diagnostics or {}
        super().__init__(message)
