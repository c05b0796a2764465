"""Enumerations for evaluation planes and restart outcomes."""

from enum import Enum


class Plane(Enum):
    """Plane sampled by a field dump."""
    XY = "xy"
    YZ = "yz"


class RestartStatus(Enum):
    """How a single optimisation restart ended."""
    CONVERGED = "converged"
    BELOW_THRESHOLD = "below_threshold"
    FAILED = "failed"
