"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class InfeasibleFrequencyError(DomainError):
    """Spatial frequencies (u, v) with u**2 + v**2 > 1 have no real direction."""


class DegenerateGeometryError(ValueError):
    """The Fisher information is singular for the requested source geometry."""


class FormatError(ValueError):
    """A file or config does not match the expected schema."""


class NumericalError(RuntimeError):
    """A non-finite value appeared inside an iterative solver."""

    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"{message} (outer iteration {iteration})")
        self.iteration = iteration
