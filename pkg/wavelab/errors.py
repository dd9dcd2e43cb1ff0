"""
Exception hierarchy shared by all wavelab modules.
"""


class WavelabError(Exception):
    """Base class for expected, reportable failures."""


class GridError(WavelabError):
    """Invalid grid or fields living on different grids."""


class ParameterError(WavelabError):
    """Model or numerical parameter outside its admissible range."""


class ConvergenceError(WavelabError):
    """An iterative solve did not converge (or collapsed)."""


class SolvabilityError(WavelabError):
    """A linear problem violates its solvability condition or is near-singular."""


class DomainTruncationError(WavelabError):
    """The periodic window is too small for the requested computation."""


class BlowUpError(WavelabError):
    """Non-finite values appeared during time stepping."""


class ConfigurationError(WavelabError):
    """Scenario file or CLI options are invalid."""
