"""Exception types shared across the package."""


class FaultlocError(Exception):
    """Base class for all package-specific errors."""


class EmptyInput(FaultlocError):
    pass


class DegenerateCentroid(FaultlocError):
    pass


class PoleProximity(FaultlocError):
    pass


class UnsupportedGeometry(FaultlocError):
    pass


class MissingId(FaultlocError):
    pass


class InsufficientPoints(FaultlocError):
    pass


class TooFewPings(FaultlocError):
    """Outage has too few vehicle pings to attempt a prediction."""


class NoCluster(FaultlocError):
    """No parameter candidate produced any cluster."""


class UnknownOutage(FaultlocError):
    pass
