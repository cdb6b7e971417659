"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad keys, incompatible domain/boundary, infeasible constraints."""


class DimensionError(ValueError):
    """A node-vector does not match the grid it is used with."""


class MultiplicityError(ValueError):
    """A simple-eigenvalue operation was invoked on a degenerate eigenvalue."""


class DegenerateGapError(ValueError):
    """A gap operation was invoked on two indices sharing one eigenvalue cluster."""


class IncompleteClusterError(RuntimeError):
    """An eigenvalue cluster touches the truncation boundary; re-solve with larger K."""


class SolverError(RuntimeError):
    """Eigensolver failure or unacceptable residual."""


class SeparationError(RuntimeError):
    """A candidate separating direction failed the definiteness verification."""
