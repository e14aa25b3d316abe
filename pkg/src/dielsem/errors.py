"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A scalar argument is outside its admissible range."""


class ConfigurationError(ValueError):
    """An inconsistent problem setup (geometry, electrodes, stabilization)."""


class AssemblyError(RuntimeError):
    """Operator assembly produced a system that cannot be solved as requested."""


class SolverError(RuntimeError):
    """A linear solve or factorization failed numerically."""


class InitializationError(RuntimeError):
    """Fixed-point initialization of the electric potential did not converge."""


class NonConvergedError(RuntimeError):
    """Pseudo-time iteration hit its iteration cap before reaching steady state."""
