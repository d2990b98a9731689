"""Exception types shared across the package."""


class RemoteRDError(Exception):
    """Base class for all errors raised by remote_rd."""


class InvalidInput(RemoteRDError, ValueError):
    """An argument violates a documented precondition."""


class Infeasible(RemoteRDError):
    """The requested distortion cannot be met (or r lies outside B_L(D))."""


class DegenerateSpectrum(RemoteRDError):
    """Eigenvalues are too close for a first-order sensitivity to be defined."""


class NotApplicable(RemoteRDError):
    """A closed form or matching condition does not apply to the given parameters."""
