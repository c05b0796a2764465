"""Adam over magnet angles, the multi-start protocol, and gradient checks."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .constants import FORCE_EPS
from .enums import RestartStatus
from .errors import GeometryError, MagtrapError, OptimizationFailedError
from .models import (
    AdamState,
    EvaluationGrid,
    FloatArray,
    LossConfig,
    MagnetArray,
    OptimizationReport,
    RestartOutcome,
    RestartPolicy,
    RobotMagnet,
    normalize_angle,
)
from .objective import TrapObjective

logger = logging.getLogger(__name__)

ValueAndGrad = Callable[[FloatArray], tuple[float, FloatArray]]

DEFAULT_GAMMA = 1.5


def _normalized(angles_rad: FloatArray) -> tuple[float, ...]:
    return tuple(normalize_angle(a) for a in np.degrees(angles_rad))


# ---------------------------------------------------------------------------
# Gradient
# ---------------------------------------------------------------------------

def loss_gradient(
    angles: Sequence[float],
    grid: EvaluationGrid,
    robot: RobotMagnet,
    cfg: LossConfig,
    array: MagnetArray,
    objective: TrapObjective | None = None,
) -> FloatArray:
    """Analytic ∂L/∂αₙ with angles and derivatives in degrees.

    Args:
        angles: One angle per magnet [degrees].
        grid: Trap-centred evaluation grid.
        robot: Trapped magnet.
        cfg: Loss configuration.
        array: Layout template.
        objective: Prebuilt objective for the same grid, robot and array; reused
            across calls so the field basis is computed once.

    Returns:
        The gradient, per degree.
    """
    values = np.asarray(angles, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("angles must be finite")
    if objective is None:
        objective = TrapObjective(array, grid, robot, cfg)
    elif objective.cfg != cfg:
        objective = objective.with_config(cfg)
    _, grad = objective.value_and_grad(np.radians(values))
    return np.asarray(grad * (math.pi / 180.0))


@dataclass(frozen=True)
class GradientCheck:
    """Analytic vs central-difference gradient comparison.

    Attributes:
        max_relative_error: Worst componentwise relative error.
        trials: Number of random angle vectors compared.
        compared: Components compared (those above the absolute floor).
        worst_angles: Angle vector [degrees] with the worst error.
    """
    max_relative_error: float
    trials: int
    compared: int
    worst_angles: tuple[float, ...]

    def passed(self, tolerance: float = 1e-5) -> bool:
        """Whether the worst error is within ``tolerance``."""
        return self.max_relative_error <= tolerance


def gradient_check(
    grid: EvaluationGrid,
    robot: RobotMagnet,
    cfg: LossConfig,
    array: MagnetArray,
    trials: int = 50,
    step: float = 1e-5,
    seed: int = 0,
    floor: float = 1e-12,
) -> GradientCheck:
    """Compare the analytic gradient with central differences at random angles.

    Args:
        grid: Trap-centred evaluation grid.
        robot: Trapped magnet.
        cfg: Loss configuration.
        array: Layout template.
        trials: Random angle vectors to test.
        step: Finite-difference step [degrees].
        seed: Generator seed for the angle draws.
        floor: Components whose magnitude is below this in both estimates are skipped.

    Returns:
        The worst relative error found.
    """
    objective = TrapObjective(array, grid, robot, cfg)
    rng = np.random.default_rng(seed)
    h = math.radians(step)
    worst, compared = 0.0, 0
    worst_angles: tuple[float, ...] = ()
    for _ in range(trials):
        angles = np.radians(rng.uniform(0.0, 360.0, len(array)))
        _, analytic = objective.value_and_grad(angles)
        numeric = np.empty_like(analytic)
        for n in range(len(angles)):
            up, down = angles.copy(), angles.copy()
            up[n] += h
            down[n] -= h
            numeric[n] = (objective.evaluate(up).total - objective.evaluate(down).total) / (2.0 * h)
        scale = np.maximum(np.abs(analytic), np.abs(numeric))
        mask = scale >= floor
        compared += int(np.count_nonzero(mask))
        if np.any(mask):
            err = float(np.max(np.abs(analytic - numeric)[mask] / scale[mask]))
            if err > worst:
                worst, worst_angles = err, _normalized(angles)
    logger.info("gradient check: %d trials, max relative error %.3e", trials, worst)
    return GradientCheck(worst, trials, compared, worst_angles)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AdamResult:
    """Trajectory summary of one Adam run.

    Attributes:
        angles: Parameters after the last update.
        history: Loss before the first update and after each update.
        best_angles: Lowest-loss iterate along the trajectory.
        best_loss: Loss at ``best_angles``.
        failed: True when a non-finite loss or gradient stopped the run.
        message: Failure reason.
    """
    angles: FloatArray
    history: tuple[float, ...]
    best_angles: FloatArray
    best_loss: float
    failed: bool = False
    message: str = ""


def adam_run(initial: FloatArray, value_and_grad: ValueAndGrad, state: AdamState, steps: int) -> AdamResult:
    """Run exactly ``steps`` Adam updates from ``initial``.

    Args:
        initial: Starting parameters.
        value_and_grad: Objective returning (loss, gradient).
        state: Hyperparameters; any stored moments are discarded.
        steps: Number of updates.

    Returns:
        The final and best iterates with a loss history of length ``steps + 1``.

    Raises:
        ValueError: If ``steps`` is below 1.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    params = np.array(initial, dtype=np.float64)
    state = state.reset()
    history: list[float] = []
    best_angles, best_loss = params.copy(), math.inf
    for t in range(steps + 1):
        loss, grad = value_and_grad(params)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            message = f"non-finite loss or gradient at step {t}"
            logger.warning("adam aborted: %s", message)
            return AdamResult(params, tuple(history), best_angles, best_loss, True, message)
        history.append(float(loss))
        if loss < best_loss:
            best_angles, best_loss = params.copy(), float(loss)
        if t == steps:
            break
        if t % 50 == 0:
            logger.debug("adam step %d loss %.6e", t, loss)
        params, state = state.advance(params, grad)
    return AdamResult(params, tuple(history), best_angles, best_loss)


# ---------------------------------------------------------------------------
# Multi-start
# ---------------------------------------------------------------------------

def _run_restart(
    objective: TrapObjective,
    adam: AdamState,
    steps: int,
    index: int,
    round_index: int,
    initial_deg: FloatArray,
    threshold: float,
) -> RestartOutcome:
    initial = tuple(float(a) for a in initial_deg)

    def value_and_grad(angles: FloatArray) -> tuple[float, FloatArray]:
        breakdown, grad = objective.value_and_grad(angles)
        return breakdown.total, grad

    try:
        result = adam_run(np.radians(initial_deg), value_and_grad, adam, steps)
        if result.failed:
            return RestartOutcome(
                index, round_index, initial, initial, math.nan, math.nan, result.history,
                RestartStatus.FAILED, result.message,
            )
        best = objective.evaluate(result.best_angles)
    except MagtrapError as exc:
        logger.warning("restart %d failed: %s", index, exc)
        return RestartOutcome(
            index, round_index, initial, initial, math.nan, math.nan, (), RestartStatus.FAILED, str(exc)
        )
    status = RestartStatus.CONVERGED if best.accuracy >= threshold else RestartStatus.BELOW_THRESHOLD
    return RestartOutcome(
        index, round_index, initial, _normalized(result.best_angles), best.total, best.accuracy,
        result.history, status,
    )


def multi_restart(
    grid: EvaluationGrid,
    robot: RobotMagnet,
    array: MagnetArray,
    cfg: LossConfig,
    policy: RestartPolicy,
    adam: AdamState | None = None,
    warm_start: Sequence[float] | None = None,
    objective: TrapObjective | None = None,
) -> OptimizationReport:
    """Optimise the angles from random starts until one is accurate enough.

    Each round draws ``policy.starts`` uniform starting vectors from a single
    seeded generator, whether or not the round stops early. Restarts run in
    order; the round ends as soon as one reaches the round's accuracy
    threshold. A round without success lowers the threshold by
    ``policy.threshold_decrement``. Restarts may run concurrently, but outcomes
    are reduced in restart order, so the report does not depend on
    ``policy.threads``.

    Args:
        grid: Trap-centred evaluation grid.
        robot: Trapped magnet.
        array: Layout template.
        cfg: Loss configuration.
        policy: Restart protocol.
        adam: Adam hyperparameters, defaults when omitted.
        warm_start: Angles [degrees] replacing the first random start.
        objective: Prebuilt objective for this grid and array, reused when given.

    Returns:
        The lowest-loss solution found, tie-broken by restart order.

    Raises:
        OptimizationFailedError: If every restart failed.
    """
    started = time.perf_counter()
    adam = adam or AdamState()
    objective = objective.with_config(cfg) if objective is not None else TrapObjective(array, grid, robot, cfg)
    rng = np.random.default_rng(policy.seed)
    outcomes: list[RestartOutcome] = []
    threshold = policy.accuracy_threshold
    rounds = 0
    executor = ThreadPoolExecutor(max_workers=policy.threads) if policy.threads > 1 else None
    try:
        for round_index in range(policy.rounds):
            rounds += 1
            threshold = policy.threshold_for_round(round_index)
            starts = rng.uniform(0.0, 360.0, size=(policy.starts, len(array)))
            if round_index == 0 and warm_start is not None:
                starts[0] = np.asarray(warm_start, dtype=np.float64)
            logger.info("round %d: up to %d starts, threshold %.3f", round_index + 1, policy.starts, threshold)
            met = False
            for batch_start in range(0, policy.starts, policy.threads):
                batch = range(batch_start, min(batch_start + policy.threads, policy.starts))
                jobs = [
                    (objective, adam, policy.steps, len(outcomes) + k, round_index, starts[i], threshold)
                    for k, i in enumerate(batch)
                ]
                results = (
                    list(executor.map(lambda job: _run_restart(*job), jobs))
                    if executor is not None
                    else [_run_restart(*job) for job in jobs]
                )
                for outcome in results:
                    outcomes.append(outcome)
                    logger.info(
                        "restart %d: %s, accuracy %.4f, loss %.6e",
                        outcome.index, outcome.status.value, outcome.accuracy, outcome.loss,
                    )
                    if outcome.status is RestartStatus.CONVERGED:
                        met = True
                        break
                if met:
                    break
            if met:
                break
            if round_index + 1 < policy.rounds:
                logger.warning(
                    "no start reached accuracy %.3f; lowering threshold to %.3f",
                    threshold, policy.threshold_for_round(round_index + 1),
                )
    finally:
        if executor is not None:
            executor.shutdown()

    succeeded = [o for o in outcomes if o.succeeded]
    elapsed = time.perf_counter() - started
    if not succeeded:
        partial = OptimizationReport(
            (), math.nan, math.nan, math.nan, math.nan, math.nan, cfg, tuple(outcomes), rounds, threshold,
            policy.seed, elapsed,
        )
        raise OptimizationFailedError(f"all {len(outcomes)} restarts failed", partial)
    best = succeeded[0]
    for outcome in succeeded[1:]:
        if outcome.loss < best.loss:
            best = outcome
    terms = objective.evaluate(np.radians(best.angles))
    return OptimizationReport(
        best.angles, terms.total, terms.accuracy, terms.direction, terms.magnitude, terms.force_sum, cfg,
        tuple(outcomes), rounds, threshold, policy.seed, elapsed,
    )


def tune_force_target(
    grid: EvaluationGrid,
    robot: RobotMagnet,
    array: MagnetArray,
    policy: RestartPolicy,
    gamma: float = DEFAULT_GAMMA,
    adam: AdamState | None = None,
    warm_start: Sequence[float] | None = None,
    direction_weight: float = 1.0,
    magnitude_weight: float = 1.0,
) -> tuple[float, OptimizationReport]:
    """Two-stage run: direction only, then direction plus magnitude.

    Stage 1 optimises with λ₂ = 0. Its grid-total force T sets Ŷ = γ·T for
    stage 2, which runs with the given weights (λ₁ = λ₂ = 1 by default) and
    starts from the stage-1 solution.

    Args:
        grid: Trap-centred evaluation grid.
        robot: Trapped magnet.
        array: Layout template.
        policy: Restart protocol for both stages.
        gamma: Multiple of the stage-1 force total used as Ŷ.
        adam: Adam hyperparameters.
        warm_start: Angles [degrees] for the first start of stage 1.
        direction_weight: λ₁ of stage 2.
        magnitude_weight: λ₂ of stage 2.

    Returns:
        Ŷ and the stage-2 report.

    Raises:
        ValueError: If ``gamma`` is not positive or the stage-2 weights are invalid.
        OptimizationFailedError: If either stage fails.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    weights = LossConfig(direction_weight, magnitude_weight, 0.0)
    objective = TrapObjective(array, grid, robot, LossConfig(1.0, 0.0, 0.0))
    stage1 = multi_restart(grid, robot, array, objective.cfg, policy, adam, warm_start, objective)
    force_target = gamma * stage1.force_sum
    logger.info("stage 1 accuracy %.4f, force sum %.4e N; stage 2 target %.4e N",
                stage1.accuracy, stage1.force_sum, force_target)
    stage2 = multi_restart(
        grid, robot, array, replace(weights, force_target=force_target), policy, adam, stage1.angles, objective
    )
    return force_target, replace(stage2, seconds=stage1.seconds + stage2.seconds)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LossSurface:
    """Exhaustive direction loss over a two-magnet angle lattice.

    Attributes:
        axis: Lattice angles [degrees], shared by both magnets.
        surface: L₁ with ``surface[a, b]`` at (axis[a], axis[b]).
        best_angles: Lattice minimiser [degrees].
        best_loss: L₁ at ``best_angles``.
    """
    axis: FloatArray
    surface: FloatArray
    best_angles: tuple[float, float]
    best_loss: float


def brute_force_2mag(
    grid: EvaluationGrid,
    robot: RobotMagnet,
    array: MagnetArray,
    resolution: float = 1.0,
) -> LossSurface:
    """Evaluate L₁ on every lattice point of a two-magnet angle grid.

    Args:
        grid: Trap-centred evaluation grid.
        robot: Trapped magnet.
        array: Two-magnet layout template.
        resolution: Lattice spacing [degrees]; must divide 360.

    Returns:
        The loss surface and its minimiser.

    Raises:
        GeometryError: If the array does not hold exactly two magnets.
        ValueError: If ``resolution`` does not divide 360.
    """
    if len(array) != 2:
        raise GeometryError(f"brute force needs exactly 2 magnets, got {len(array)}")
    if not resolution > 0 or abs(360.0 / resolution - round(360.0 / resolution)) > 1e-9:
        raise ValueError(f"resolution {resolution} does not divide 360")
    count = 360.0 / resolution
    axis = np.arange(int(round(count))) * resolution
    cfg = LossConfig(1.0, 0.0, 0.0)
    objective = TrapObjective(array, grid, robot, cfg)
    target = objective.target.vectors
    radians = np.radians(axis)
    surface = np.empty((axis.size, axis.size))
    for a, first in enumerate(radians):
        batch = np.column_stack([np.full(axis.size, first), radians])
        forces = objective.kernel.forces_batch(batch)
        norms = np.linalg.norm(forces, axis=2)
        flags = norms <= FORCE_EPS
        unit = forces / np.where(flags, 1.0, norms)[..., None]
        per_point = np.sum((unit - target[None]) ** 2, axis=2)
        per_point = np.where(flags, 1.0 + cfg.zero_force_margin, per_point)
        surface[a] = per_point.mean(axis=1)
    a, b = np.unravel_index(int(np.argmin(surface)), surface.shape)
    best = (float(axis[a]), float(axis[b]))
    logger.info("brute force: %d evaluations, minimum %.6e at %s", surface.size, surface[a, b], best)
    return LossSurface(axis, surface, best, float(surface[a, b]))
