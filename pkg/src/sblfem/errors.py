"""Exception types shared across the package."""


class SblfemError(Exception):
    """Base class for all package errors."""


class ConfigError(SblfemError):
    """Invalid configuration or problem data (CLI exit code 1)."""


class GeometryError(SblfemError):
    """Degenerate or inconsistent geometric input."""


class MeshError(SblfemError):
    """Mesh construction or admissibility failure."""


class PointLocationError(SblfemError):
    """A physical point could not be located in any element."""


class SingularSystemError(SblfemError):
    """The assembled linear system is numerically singular."""


class NumericalError(SblfemError):
    """A numerical contract was violated (CLI exit code 2)."""
