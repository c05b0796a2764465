"""Target force directions, composite trap loss, and accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import FORCE_EPS
from .dipole_field import FieldKernel, KernelState, evaluate_grid
from .errors import GeometryError
from .models import EvaluationGrid, FloatArray, ForceField, LossConfig, MagnetArray, RobotMagnet, TargetField


def build_target(grid: EvaluationGrid) -> TargetField:
    """Unit vectors from each grid point towards the trap.

    Raises:
        GeometryError: If the grid has no trap point.
    """
    if grid.trap_point is None:
        raise GeometryError("target directions need a trap-centred grid")
    offset = np.asarray(grid.trap_point) - grid.points
    return TargetField(offset / np.linalg.norm(offset, axis=1)[:, None])


def _unit(forces: FloatArray, force_eps: float) -> tuple[FloatArray, np.ndarray, FloatArray]:
    norms = np.linalg.norm(forces, axis=1)
    flags = norms <= force_eps
    safe = np.where(flags, 1.0, norms)
    unit = forces / safe[:, None]
    unit[flags] = 0.0
    return unit, flags, norms


def normalize_output(field: ForceField, force_eps: float = FORCE_EPS) -> tuple[FloatArray, np.ndarray]:
    """Force directions F/‖F‖ per point.

    Points with ‖F‖ ≤ ``force_eps`` get the zero vector and are flagged.

    Returns:
        The unit vectors and a boolean flag array marking zero-force points.
    """
    unit, flags, _ = _unit(np.asarray(field.forces), force_eps)
    return unit, flags


def _check_shapes(output: FloatArray, target: TargetField) -> None:
    if np.shape(output) != target.vectors.shape:
        raise ValueError(f"output shape {np.shape(output)} does not match target shape {target.vectors.shape}")


def direction_loss(
    output: FloatArray,
    target: TargetField,
    flags: np.ndarray | None = None,
    zero_force_margin: float = 1.0,
) -> float:
    """Mean squared distance between output and target directions, in [0, 4].

    Flagged zero-force points contribute ‖F_target‖² plus ``zero_force_margin``.

    Raises:
        ValueError: If the shapes differ.
    """
    _check_shapes(output, target)
    per_point = np.sum((np.asarray(output) - target.vectors) ** 2, axis=1)
    if flags is not None:
        per_point = np.where(flags, 1.0 + zero_force_margin, per_point)
    return float(np.mean(per_point))


def magnitude_loss(field: ForceField, force_target: float) -> float:
    """Squared deviation of Σ‖F‖ from the desired total ``force_target``."""
    return (field.total_magnitude() - force_target) ** 2


def accuracy(
    output: FloatArray,
    target: TargetField,
    flags: np.ndarray | None = None,
    zero_force_margin: float = 1.0,
) -> float:
    """Direction accuracy 1 − L₁/4, i.e. (1 + mean cosine similarity)/2 for unit outputs."""
    return 1.0 - direction_loss(output, target, flags, zero_force_margin) / 4.0


def total_loss(array: MagnetArray, grid: EvaluationGrid, robot: RobotMagnet, cfg: LossConfig) -> float:
    """λ₁·L₁ + λ₂·L₂ for ``array`` at its current angles."""
    field = evaluate_grid(array, grid, robot)
    output, flags = normalize_output(field)
    target = build_target(grid)
    l1 = direction_loss(output, target, flags, cfg.zero_force_margin)
    l2 = magnitude_loss(field, cfg.force_target)
    return cfg.direction_weight * l1 + cfg.magnitude_weight * l2


@dataclass(frozen=True)
class LossBreakdown:
    """Loss terms at one angle vector.

    Attributes:
        total: λ₁·L₁ + λ₂·L₂.
        direction: L₁.
        magnitude: L₂.
        force_sum: Σ‖F‖ [N].
        accuracy: 1 − L₁/4.
    """
    total: float
    direction: float
    magnitude: float
    force_sum: float
    accuracy: float


class TrapObjective:
    """The trap loss over a fixed grid and array layout, with its analytic gradient.

    Angles are radians throughout; callers convert at their boundary.
    """

    def __init__(self, array: MagnetArray, grid: EvaluationGrid, robot: RobotMagnet, cfg: LossConfig) -> None:
        """Precompute the field kernel and target for the layout.

        Args:
            array: Layout template; its angles are ignored.
            grid: Trap-centred evaluation grid.
            robot: Trapped magnet.
            cfg: Loss weights and force target.
        """
        self.array = array
        self.grid = grid
        self.robot = robot
        self.cfg = cfg
        self.kernel = FieldKernel(grid.points, array, robot)
        self.target = build_target(grid)

    def with_config(self, cfg: LossConfig) -> TrapObjective:
        """Share the kernel with a different loss configuration."""
        clone = object.__new__(TrapObjective)
        clone.__dict__.update(self.__dict__)
        clone.cfg = cfg
        return clone

    def _terms(self, state: KernelState) -> tuple[LossBreakdown, FloatArray, np.ndarray, FloatArray]:
        unit, flags, norms = _unit(state.forces, FORCE_EPS)
        l1 = direction_loss(unit, self.target, flags, self.cfg.zero_force_margin)
        force_sum = float(np.sum(norms))
        l2 = (force_sum - self.cfg.force_target) ** 2
        total = self.cfg.direction_weight * l1 + self.cfg.magnitude_weight * l2
        return LossBreakdown(total, l1, l2, force_sum, 1.0 - l1 / 4.0), unit, flags, norms

    def evaluate(self, angles: FloatArray) -> LossBreakdown:
        """Loss terms at ``angles`` [rad].

        Raises:
            DegenerateFieldError: If the field vanishes at a grid point.
        """
        return self._terms(self.kernel.evaluate(np.asarray(angles, dtype=np.float64)))[0]

    def forces(self, angles: FloatArray) -> FloatArray:
        """Per-point forces at ``angles`` [rad]."""
        return self.kernel.evaluate(np.asarray(angles, dtype=np.float64)).forces

    def value_and_grad(self, angles: FloatArray) -> tuple[LossBreakdown, FloatArray]:
        """Loss terms and ∂L/∂α (per radian) at ``angles`` [rad].

        Zero-force points contribute no gradient.
        """
        angles = np.asarray(angles, dtype=np.float64)
        state = self.kernel.evaluate(angles)
        breakdown, unit, flags, norms = self._terms(state)
        t = self.target.vectors
        safe = np.where(flags, 1.0, norms)
        cos_sim = np.einsum("gk,gk->g", unit, t)
        d_direction = -2.0 / len(t) * (t - cos_sim[:, None] * unit) / safe[:, None]
        d_magnitude = 2.0 * (breakdown.force_sum - self.cfg.force_target) * unit
        force_grad = self.cfg.direction_weight * d_direction + self.cfg.magnitude_weight * d_magnitude
        force_grad[flags] = 0.0
        return breakdown, self.kernel.angle_gradient(state, angles, force_grad)
