"""
Domain errors shared by every app.

Services raise these; the management commands map them to exit codes.
"""
from typing import Optional, Tuple


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidConfigError(SimulationError, ValueError):
    """A configuration value is out of range or inconsistent."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


class InvalidInputError(SimulationError, ValueError):
    """An input collection is empty or otherwise unusable."""


class ShapeError(SimulationError, ValueError):
    """Array dimensions do not line up."""


class CalibrationError(SimulationError):
    """The requested trigger probability cannot be reached on the profile."""

    def __init__(self, message: str, achievable: Tuple[float, float]):
        self.achievable = achievable
        low, high = achievable
        super().__init__(f"{message} (achievable hit fraction range: [{low:.6g}, {high:.6g}])")


class DatasetParseError(SimulationError):
    """A dataset file does not follow the documented grammar."""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class ConfigNotFoundError(SimulationError):
    """The experiment config file does not exist."""
