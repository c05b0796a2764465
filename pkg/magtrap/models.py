"""Immutable magnet, grid, field, and optimisation records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .constants import MU_0
from .enums import Plane, RestartStatus
from .errors import GeometryError

FloatArray = NDArray[np.float64]


def normalize_angle(degrees: float) -> float:
    """Map an angle in degrees onto [0, 360)."""
    wrapped = math.fmod(float(degrees), 360.0)
    if wrapped < 0.0:
        wrapped += 360.0
    if wrapped >= 360.0:
        wrapped = 0.0
    return wrapped


def _frozen(values: Any, shape: tuple[int, ...] | None = None) -> FloatArray:
    arr = np.array(values, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise GeometryError(f"expected shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# Magnets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Magnet:
    """A cubic permanent magnet modelled as a point dipole.

    The moment starts along +Z and is rotated counterclockwise about the X
    axis by ``angle`` degrees.

    Attributes:
        center: Dipole position [m].
        edge_length: Cube edge length [m].
        remanence: Material remanence [T].
        angle: Rotation about X [degrees], stored on [0, 360).
    """
    center: tuple[float, float, float]
    edge_length: float
    remanence: float
    angle: float = 0.0

    def __post_init__(self) -> None:
        """Validate dimensions and normalise the angle.

        Raises:
            GeometryError: If the edge length or remanence is not positive.
        """
        if not self.edge_length > 0:
            raise GeometryError(f"edge_length must be positive, got {self.edge_length}")
        if not self.remanence > 0:
            raise GeometryError(f"remanence must be positive, got {self.remanence}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "angle", normalize_angle(self.angle))

    @property
    def moment_magnitude(self) -> float:
        """Dipole moment magnitude Br·l³/μ₀ [A·m²]."""
        return self.remanence * self.edge_length**3 / MU_0

    @property
    def space_diagonal(self) -> float:
        """Cube space diagonal √3·l [m]."""
        return math.sqrt(3.0) * self.edge_length

    def rotated(self, angle: float) -> Magnet:
        """Return a copy of this magnet at a different angle."""
        return Magnet(self.center, self.edge_length, self.remanence, angle)


@dataclass(frozen=True)
class MagnetArray:
    """An even, z-symmetric ladder of magnets on the Z axis.

    Magnets are kept in canonical order, highest z first, whatever order they
    were supplied in.

    Attributes:
        magnets: Magnets ordered by descending z.
        pitch: Centre-to-centre spacing [m].
        extra_spacing: Gap added to the face diagonal when the pitch was derived [m].
    """
    magnets: tuple[Magnet, ...]
    pitch: float
    extra_spacing: float = 0.0

    def __post_init__(self) -> None:
        """Sort magnets canonically and check the layout invariants.

        Raises:
            GeometryError: If the count is odd or zero, the layout is not
                symmetric about the origin, or the pitch lets rotating cubes collide.
        """
        ordered = tuple(sorted(self.magnets, key=lambda m: -m.center[2]))
        object.__setattr__(self, "magnets", ordered)
        n = len(ordered)
        if n < 2 or n % 2:
            raise GeometryError(f"magnet count must be even and at least 2, got {n}")
        min_pitch = math.sqrt(2.0) * max(m.edge_length for m in ordered)
        if self.pitch < min_pitch * (1.0 - 1e-12):
            raise GeometryError(
                f"pitch {self.pitch:.6g} m is below the face diagonal {min_pitch:.6g} m"
            )
        tol = 1e-9 * max(1.0, self.pitch)
        for upper, lower in zip(ordered, reversed(ordered)):
            if abs(upper.center[2] + lower.center[2]) > tol:
                raise GeometryError("magnet centers must be symmetric about the origin")

    def __len__(self) -> int:
        """Number of magnets."""
        return len(self.magnets)

    @property
    def angles(self) -> FloatArray:
        """Rotation angles [degrees] in canonical order."""
        return np.array([m.angle for m in self.magnets], dtype=np.float64)

    @property
    def centers(self) -> FloatArray:
        """Dipole positions, shape (n, 3) [m]."""
        return np.array([m.center for m in self.magnets], dtype=np.float64)

    @property
    def moment_magnitudes(self) -> FloatArray:
        """Per-magnet moment magnitudes [A·m²]."""
        return np.array([m.moment_magnitude for m in self.magnets], dtype=np.float64)

    def with_angles(self, angles: Any) -> MagnetArray:
        """Return the same layout with new angles [degrees].

        Raises:
            GeometryError: If the number of angles differs from the magnet count.
        """
        values = [float(a) for a in np.ravel(angles)]
        if len(values) != len(self.magnets):
            raise GeometryError(f"expected {len(self.magnets)} angles, got {len(values)}")
        return MagnetArray(
            tuple(m.rotated(a) for m, a in zip(self.magnets, values)),
            self.pitch,
            self.extra_spacing,
        )

    def with_remanence_scale(self, factor: float) -> MagnetArray:
        """Return the same layout with every remanence multiplied by ``factor``."""
        return MagnetArray(
            tuple(Magnet(m.center, m.edge_length, m.remanence * factor, m.angle) for m in self.magnets),
            self.pitch,
            self.extra_spacing,
        )


@dataclass(frozen=True)
class RobotMagnet:
    """The trapped magnet, whose moment aligns with the local flux density.

    Attributes:
        remanence: Material remanence [T].
        volume: Magnet volume [m³].
    """
    remanence: float
    volume: float

    def __post_init__(self) -> None:
        """Validate the material parameters.

        Raises:
            GeometryError: If remanence or volume is not positive.
        """
        if not self.remanence > 0:
            raise GeometryError(f"robot remanence must be positive, got {self.remanence}")
        if not self.volume > 0:
            raise GeometryError(f"robot volume must be positive, got {self.volume}")

    @property
    def moment_magnitude(self) -> float:
        """Moment magnitude Br·V/μ₀ [A·m²]."""
        return self.remanence * self.volume / MU_0


# ---------------------------------------------------------------------------
# Grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvaluationGrid:
    """An evenly spaced planar point set.

    Points are stored row by row: ``rows`` rows of ``columns`` points each.
    Trap-centred grids carry ``trap_point`` and never contain it; plane dumps
    leave it unset.

    Attributes:
        points: Coordinates, shape (rows * columns, 3) [m].
        columns: Points per row (i).
        rows: Number of rows (j).
        half_width: Half the side of the sampled square [m].
        trap_point: Trap position for trap-centred grids [m].
        plane: Which coordinate plane the points span.
    """
    points: FloatArray
    columns: int
    rows: int
    half_width: float
    trap_point: tuple[float, float, float] | None = None
    plane: Plane = Plane.XY

    def __post_init__(self) -> None:
        """Freeze the point array and check its shape.

        Raises:
            GeometryError: If the point count does not match the resolution.
        """
        if self.columns < 1 or self.rows < 1:
            raise GeometryError("grid resolution must be at least 1x1")
        object.__setattr__(self, "points", _frozen(self.points, (self.rows * self.columns, 3)))
        if self.trap_point is not None:
            object.__setattr__(self, "trap_point", tuple(float(c) for c in self.trap_point))

    def __len__(self) -> int:
        """Number of points."""
        return int(self.points.shape[0])

    def as_image(self, values: FloatArray) -> FloatArray:
        """Reshape per-point values to (rows, columns, ...)."""
        return np.asarray(values).reshape((self.rows, self.columns) + np.shape(values)[1:])

    def permuted(self, order: Any) -> EvaluationGrid:
        """Return a flat (rows=1) grid with points reordered by ``order``."""
        pts = self.points[np.asarray(order)]
        return EvaluationGrid(pts, len(pts), 1, self.half_width, self.trap_point, self.plane)


@dataclass(frozen=True, eq=False)
class ForceField:
    """Forces (and optionally flux densities) on a grid.

    Attributes:
        forces: Force on the robot at each point, shape (n, 3) [N].
        grid: The grid the field was evaluated on.
        flux: Flux density at each point, shape (n, 3) [T], if recorded.
    """
    forces: FloatArray
    grid: EvaluationGrid
    flux: FloatArray | None = None

    def __post_init__(self) -> None:
        """Freeze arrays and check shape and finiteness.

        Raises:
            GeometryError: If shapes disagree with the grid or any value is not finite.
        """
        shape = (len(self.grid), 3)
        object.__setattr__(self, "forces", _frozen(self.forces, shape))
        if not np.all(np.isfinite(self.forces)):
            raise GeometryError("force field contains non-finite values")
        if self.flux is not None:
            object.__setattr__(self, "flux", _frozen(self.flux, shape))

    def magnitudes(self) -> FloatArray:
        """Per-point force magnitude [N]."""
        return np.asarray(np.linalg.norm(self.forces, axis=1))

    def in_plane_magnitudes(self) -> FloatArray:
        """Per-point magnitude of the (F_x, F_y) components [N]."""
        return np.asarray(np.hypot(self.forces[:, 0], self.forces[:, 1]))

    def total_magnitude(self) -> float:
        """Sum of force magnitudes over the grid [N]."""
        return float(np.sum(self.magnitudes()))


@dataclass(frozen=True, eq=False)
class FieldDump:
    """A leniently evaluated plane sample; failed points hold NaN.

    Attributes:
        grid: The sampled grid.
        forces: Force per point [N], NaN where evaluation failed.
        flux: Flux density per point [T], NaN where evaluation failed.
        errors: Per-point error message, empty for clean points.
    """
    grid: EvaluationGrid
    forces: FloatArray
    flux: FloatArray
    errors: tuple[str, ...]

    @property
    def failed(self) -> int:
        """Number of points that could not be evaluated."""
        return sum(1 for e in self.errors if e)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossConfig:
    """Weights and target of the composite loss λ₁·L₁ + λ₂·L₂.

    Attributes:
        direction_weight: λ₁.
        magnitude_weight: λ₂.
        force_target: Ŷ, desired sum of force magnitudes over the grid [N].
        zero_force_margin: Extra squared error charged at zero-force points.
    """
    direction_weight: float = 1.0
    magnitude_weight: float = 0.0
    force_target: float = 0.0
    zero_force_margin: float = 1.0

    def __post_init__(self) -> None:
        """Validate the weights.

        Raises:
            ValueError: If a weight is negative, both are zero, or Ŷ is negative.
        """
        if self.direction_weight < 0 or self.magnitude_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.direction_weight == 0 and self.magnitude_weight == 0:
            raise ValueError("at least one loss weight must be positive")
        if self.force_target < 0:
            raise ValueError(f"force target must be non-negative, got {self.force_target}")
        if self.zero_force_margin < 0:
            raise ValueError("zero-force margin must be non-negative")


@dataclass(frozen=True, eq=False)
class TargetField:
    """Unit vectors pointing from each grid point to the trap.

    Attributes:
        vectors: Shape (n, 3), unit norm.
    """
    vectors: FloatArray

    def __post_init__(self) -> None:
        """Freeze the vectors and check they are unit length.

        Raises:
            GeometryError: If any vector is not of unit norm.
        """
        object.__setattr__(self, "vectors", _frozen(self.vectors))
        norms = np.linalg.norm(self.vectors, axis=1)
        if not np.allclose(norms, 1.0, rtol=0.0, atol=1e-12):
            raise GeometryError("target vectors must have unit norm")


# ---------------------------------------------------------------------------
# Optimiser
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AdamState:
    """Adam hyperparameters plus the moment estimates after ``step`` updates.

    Attributes:
        learning_rate: η.
        beta1: First-moment decay.
        beta2: Second-moment decay.
        epsilon: Denominator fuzz.
        step: Number of updates applied so far.
        first_moment: Biased first-moment estimate, or None before the first update.
        second_moment: Biased second-moment estimate, or None before the first update.
    """
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: FloatArray | None = None
    second_moment: FloatArray | None = None

    def __post_init__(self) -> None:
        """Validate hyperparameters.

        Raises:
            ValueError: If a decay rate is outside [0, 1) or the step is negative.
        """
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta values must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.step < 0:
            raise ValueError("step count must be non-negative")

    def reset(self) -> AdamState:
        """Return the same hyperparameters with cleared moments."""
        return AdamState(self.learning_rate, self.beta1, self.beta2, self.epsilon)

    def advance(self, params: FloatArray, grad: FloatArray) -> tuple[FloatArray, AdamState]:
        """Apply one bias-corrected Adam update.

        Args:
            params: Current parameter vector.
            grad: Gradient of the objective at ``params``.

        Returns:
            The updated parameters and the new state.
        """
        m = self.first_moment if self.first_moment is not None else np.zeros_like(params)
        v = self.second_moment if self.second_moment is not None else np.zeros_like(params)
        t = self.step + 1
        m = self.beta1 * m + (1.0 - self.beta1) * grad
        v = self.beta2 * v + (1.0 - self.beta2) * (grad * grad)
        m_hat = m / (1.0 - self.beta1**t)
        v_hat = v / (1.0 - self.beta2**t)
        updated = params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
        state = AdamState(self.learning_rate, self.beta1, self.beta2, self.epsilon, t, m, v)
        return updated, state


@dataclass(frozen=True)
class RestartPolicy:
    """Multi-start protocol with an accuracy stopping threshold.

    Attributes:
        starts: Random starts per round (k).
        steps: Adam updates per start.
        accuracy_threshold: Accuracy that ends the search in the first round.
        threshold_decrement: Absolute amount the threshold drops after a round without success.
        rounds: Maximum rounds (c).
        seed: Seed of the single generator that draws every start.
        threads: Restarts run concurrently.
    """
    starts: int = 5
    steps: int = 300
    accuracy_threshold: float = 0.9
    threshold_decrement: float = 0.1
    rounds: int = 3
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        """Validate the policy.

        Raises:
            ValueError: If any count is below 1 or the threshold is outside (0, 1].
        """
        if self.starts < 1 or self.steps < 1 or self.rounds < 1 or self.threads < 1:
            raise ValueError("starts, steps, rounds and threads must be at least 1")
        if not 0.0 < self.accuracy_threshold <= 1.0:
            raise ValueError(f"accuracy threshold must lie in (0, 1], got {self.accuracy_threshold}")
        if self.threshold_decrement < 0:
            raise ValueError("threshold decrement must be non-negative")

    def threshold_for_round(self, round_index: int) -> float:
        """Threshold in force during the zero-based ``round_index``."""
        return max(0.0, self.accuracy_threshold - round_index * self.threshold_decrement)


@dataclass(frozen=True)
class RestartOutcome:
    """Result of one random start.

    Attributes:
        index: Zero-based restart number across all rounds.
        round: Zero-based round the restart belongs to.
        initial_angles: Starting angles [degrees].
        angles: Best angles reached [degrees, normalised].
        loss: Loss at ``angles``.
        accuracy: Accuracy at ``angles``.
        history: Loss after 0..steps updates.
        status: How the restart ended.
        message: Failure reason, empty on success.
    """
    index: int
    round: int
    initial_angles: tuple[float, ...]
    angles: tuple[float, ...]
    loss: float
    accuracy: float
    history: tuple[float, ...]
    status: RestartStatus
    message: str = ""

    @property
    def succeeded(self) -> bool:
        """True unless the restart diverged or hit a degenerate field."""
        return self.status is not RestartStatus.FAILED

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready representation."""
        return {
            "index": self.index,
            "round": self.round,
            "status": self.status.value,
            "initial_angles_deg": list(self.initial_angles),
            "angles_deg": list(self.angles),
            "loss": self.loss,
            "accuracy": self.accuracy,
            "history": list(self.history),
            "message": self.message,
        }


@dataclass(frozen=True)
class OptimizationReport:
    """Best solution of a multi-start run and how it was reached.

    Attributes:
        angles: Best angles α* [degrees, normalised].
        loss: Total loss at α*.
        accuracy: Accuracy at α*.
        direction_loss: L₁ at α*.
        magnitude_loss: L₂ at α*.
        force_sum: Σ‖F‖ over the grid at α* [N].
        loss_config: Loss settings the run used.
        restarts: Every executed restart in order.
        rounds_executed: Rounds started.
        final_threshold: Accuracy threshold in force when the run stopped.
        seed: Generator seed.
        seconds: Wall-clock duration.
    """
    angles: tuple[float, ...]
    loss: float
    accuracy: float
    direction_loss: float
    magnitude_loss: float
    force_sum: float
    loss_config: LossConfig
    restarts: tuple[RestartOutcome, ...]
    rounds_executed: int
    final_threshold: float
    seed: int
    seconds: float = field(default=0.0, compare=False)

    @property
    def restarts_executed(self) -> int:
        """Number of restarts that ran."""
        return len(self.restarts)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready representation; wall-clock data sits under ``timing``."""
        return {
            "angles_deg": list(self.angles),
            "loss": self.loss,
            "accuracy": self.accuracy,
            "direction_loss": self.direction_loss,
            "magnitude_loss": self.magnitude_loss,
            "force_sum_N": self.force_sum,
            "lambda1": self.loss_config.direction_weight,
            "lambda2": self.loss_config.magnitude_weight,
            "force_target_N": self.loss_config.force_target,
            "restarts_executed": self.restarts_executed,
            "rounds_executed": self.rounds_executed,
            "final_threshold": self.final_threshold,
            "seed": self.seed,
            "restarts": [r.to_dict() for r in self.restarts],
            "timing": {"seconds": self.seconds},
        }
