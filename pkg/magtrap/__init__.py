"""Design rotatable permanent-magnet arrays that trap a magnetic robot."""

from .config import RunConfig
from .dipole_field import FieldKernel, evaluate_grid, evaluate_plane, force_total, robot_moment
from .enums import Plane, RestartStatus
from .errors import (
    AnalysisError,
    ConfigError,
    DegenerateFieldError,
    FieldEvaluationError,
    GeometryError,
    MagtrapError,
    OptimizationFailedError,
    SingularityError,
)
from .geometry import build_array, build_grid, moment_vector, plane_grid
from .models import (
    AdamState,
    EvaluationGrid,
    ForceField,
    LossConfig,
    Magnet,
    MagnetArray,
    OptimizationReport,
    RestartPolicy,
    RobotMagnet,
)
from .objective import TrapObjective, accuracy, build_target, direction_loss, magnitude_loss, total_loss
from .optimizer import adam_run, brute_force_2mag, gradient_check, loss_gradient, multi_restart, tune_force_target

__all__ = [
    "Magnet",
    "MagnetArray",
    "RobotMagnet",
    "EvaluationGrid",
    "ForceField",
    "LossConfig",
    "AdamState",
    "RestartPolicy",
    "OptimizationReport",
    "Plane",
    "RestartStatus",
    "RunConfig",
    "FieldKernel",
    "TrapObjective",
    "build_array",
    "build_grid",
    "plane_grid",
    "moment_vector",
    "robot_moment",
    "force_total",
    "evaluate_grid",
    "evaluate_plane",
    "build_target",
    "direction_loss",
    "magnitude_loss",
    "accuracy",
    "total_loss",
    "loss_gradient",
    "gradient_check",
    "adam_run",
    "multi_restart",
    "tune_force_target",
    "brute_force_2mag",
    "MagtrapError",
    "GeometryError",
    "ConfigError",
    "SingularityError",
    "DegenerateFieldError",
    "FieldEvaluationError",
    "AnalysisError",
    "OptimizationFailedError",
]
