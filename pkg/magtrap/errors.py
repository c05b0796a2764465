"""Exception hierarchy for magnet-array trap design."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .models import OptimizationReport


class MagtrapError(Exception):
    """Base class for every error raised by the package."""


class GeometryError(MagtrapError, ValueError):
    """Invalid magnet, array, or grid parameters."""


class ConfigError(MagtrapError, ValueError):
    """A configuration key is unknown or its value is malformed."""

    def __init__(self, key: str, message: str) -> None:
        """Record the offending key alongside the message.

        Args:
            key: Name of the configuration key at fault.
            message: Human-readable description of the problem.
        """
        super().__init__(f"{key}: {message}")
        self.key = key


class _PointError(MagtrapError, ValueError):
    """An error tied to one evaluation point."""

    def __init__(self, point: Any, message: str, index: int | None = None) -> None:
        super().__init__(message)
        self.point = tuple(float(c) for c in point)
        self.index = index


class SingularityError(_PointError):
    """Field or force requested at a dipole centre."""


class DegenerateFieldError(_PointError):
    """Flux density too small to orient the robot magnet."""


class AnalysisError(MagtrapError, ValueError):
    """A trap metric is undefined for the given field."""


class FieldEvaluationError(MagtrapError):
    """A grid evaluation failed at one point.

    Attributes:
        index: Position of the failing point in grid order.
        point: Coordinates of the failing point [m].
    """

    def __init__(self, index: int, point: Any, cause: Exception) -> None:
        """Wrap the per-point cause.

        Args:
            index: Position of the failing point in grid order.
            point: Coordinates of the failing point [m].
            cause: The underlying per-point error.
        """
        coords = tuple(float(c) for c in point)
        super().__init__(f"grid point {index} at {coords} failed: {cause}")
        self.index = index
        self.point = coords


class OptimizationFailedError(MagtrapError):
    """Every restart of an optimisation run failed."""

    def __init__(self, message: str, report: OptimizationReport | None = None) -> None:
        """Attach whatever partial report was collected.

        Args:
            message: Description of the failure.
            report: Partial report with the failed restarts, if any.
        """
        super().__init__(message)
        self.report = report
