"""Exception hierarchy shared by every module."""


class InvalidArgumentError(ValueError):
    """An argument is outside its documented domain."""


class ShapeError(ValueError):
    """Array shapes are inconsistent with the requested operation."""


class InvalidPilotError(InvalidArgumentError):
    """Pilot matrix rows are not mutually orthogonal with energy K."""


class InvalidScenarioError(InvalidArgumentError):
    """A scenario does not carry exactly the fields its kind requires."""


class InvalidStateError(RuntimeError):
    """A cached intermediate no longer matches the object it came from."""


class NumericalError(ArithmeticError):
    """Base class for estimation failures caused by degenerate data."""


class DegenerateAntennaError(NumericalError):
    def __init__(self, antenna, message=None):
        self.antenna = antenna
        super().__init__(message or f"antenna {antenna} has zero uplink energy")


class IllConditionedError(NumericalError):
    """Normal equations too ill-conditioned to solve reliably."""


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""
