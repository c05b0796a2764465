"""Trap metrics and trap-distance sweeps."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage, optimize

from .config import MM, RunConfig
from .dipole_field import FieldKernel, MagnetSource, dipole_flux, evaluate_grid, magnets_of
from .enums import Plane
from .errors import AnalysisError, MagtrapError
from .geometry import mirror_angles, moment_vector, plane_grid
from .models import EvaluationGrid, FloatArray, ForceField, MagnetArray, OptimizationReport, RobotMagnet
from .objective import accuracy, build_target, normalize_output
from .optimizer import multi_restart, tune_force_target

logger = logging.getLogger(__name__)

LOW_FORCE_BAND = 0.05


# ---------------------------------------------------------------------------
# Single-trap metrics
# ---------------------------------------------------------------------------

def trap_center(field: ForceField, grid: EvaluationGrid, band: float = LOW_FORCE_BAND) -> tuple[float, float]:
    """Mean (x, y) of the points whose in-plane force is within ``band`` of the minimum [m]."""
    magnitude = field.in_plane_magnitudes()
    lowest = magnitude <= (1.0 + band) * float(np.min(magnitude))
    centre = grid.points[lowest, :2].mean(axis=0)
    return float(centre[0]), float(centre[1])


def avg_force_in_radius(
    field: ForceField,
    grid: EvaluationGrid,
    center: Sequence[float],
    radius: float,
) -> float:
    """Mean ‖F‖ over grid points within ``radius`` of ``center`` in the plane [N].

    Raises:
        ValueError: If ``radius`` is not positive.
        AnalysisError: If no grid point lies within ``radius``.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    offset = grid.points[:, :2] - np.asarray(center[:2], dtype=np.float64)
    inside = np.hypot(offset[:, 0], offset[:, 1]) <= radius
    if not np.any(inside):
        raise AnalysisError(f"no grid point within {radius:.4g} m of {tuple(center)}")
    return float(np.mean(field.magnitudes()[inside]))


@dataclass(frozen=True)
class AspectRatio:
    """Shape of the low-force region around the trap.

    Attributes:
        ratio: Longer extent over shorter extent, at least 1.
        extent_x: Region extent along X [m].
        extent_y: Region extent along Y [m].
        truncated: True when the region reaches the edge of the evaluated area.
    """
    ratio: float
    extent_x: float
    extent_y: float
    truncated: bool


def _seed_cell(mags: FloatArray, below: NDArray[np.bool_], band: float) -> tuple[int, int]:
    # Low-force band cell nearest the band centroid, as trap_center picks the centre.
    lowest = mags <= (1.0 + band) * float(np.nanmin(mags))
    rows, cols = np.nonzero(lowest & below)
    gap = np.hypot(rows - rows.mean(), cols - cols.mean())
    k = int(np.argmin(gap))
    return int(rows[k]), int(cols[k])


def aspect_ratio_from_magnitudes(
    magnitudes: FloatArray,
    threshold: float,
    spacing_x: float,
    spacing_y: float,
    band: float = LOW_FORCE_BAND,
) -> AspectRatio:
    """Axis-aligned extents of the below-threshold region around the trap centre.

    The region is the connected set of below-threshold cells holding the
    low-force cell nearest the centroid of the ``band`` around the minimum.
    NaN cells (degenerate points) belong to no region.

    Args:
        magnitudes: Force magnitudes on a regular grid, shape (rows, columns), rows along Y.
        threshold: Force bound defining the region [N].
        spacing_x: Column spacing [m].
        spacing_y: Row spacing [m].
        band: Relative band above the minimum used to locate the centre.

    Returns:
        The aspect ratio of the region around the trap centre.

    Raises:
        ValueError: If ``threshold`` is not positive.
        AnalysisError: If no cell is below the threshold.
    """
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    mags = np.asarray(magnitudes, dtype=np.float64)
    below = np.isfinite(mags) & (mags < threshold)
    if not np.any(below):
        raise AnalysisError(f"no point has force below {threshold:.3g} N")
    labels, _ = ndimage.label(below)
    seed = _seed_cell(mags, below, band)
    rows, cols = np.nonzero(labels == labels[seed])
    extent_x = (cols.max() - cols.min() + 1) * spacing_x
    extent_y = (rows.max() - rows.min() + 1) * spacing_y
    truncated = bool(
        rows.min() == 0 or cols.min() == 0 or rows.max() == mags.shape[0] - 1 or cols.max() == mags.shape[1] - 1
    )
    ratio = max(extent_x, extent_y) / min(extent_x, extent_y)
    return AspectRatio(float(ratio), float(extent_x), float(extent_y), truncated)


def trap_aspect_ratio(
    array: MagnetArray,
    robot: RobotMagnet,
    trap_distance: float,
    threshold: float = 1e-4,
    half_width: float = 0.01,
    resolution: int = 81,
) -> AspectRatio:
    """Aspect ratio of the region around the trap where ‖F‖ < ``threshold``.

    Args:
        array: Array at its optimised angles.
        robot: Trapped magnet.
        trap_distance: y of the trap [m].
        threshold: Force bound [N].
        half_width: Half side of the evaluated square [m].
        resolution: Samples per side of the fine grid.

    Returns:
        The ratio, with ``truncated`` set when the region touches the area boundary.
    """
    grid = plane_grid(
        Plane.XY, (-half_width, half_width), (trap_distance - half_width, trap_distance + half_width),
        resolution, resolution,
    )
    kernel = FieldKernel(grid.points, array, robot)
    state = kernel.evaluate(np.radians(array.angles), strict=False)
    magnitudes = np.linalg.norm(state.forces, axis=1)
    magnitudes[state.degenerate] = np.nan
    spacing = 2.0 * half_width / max(resolution - 1, 1)
    result = aspect_ratio_from_magnitudes(grid.as_image(magnitudes), threshold, spacing, spacing)
    if result.truncated:
        logger.info("low-force region at %.4g m reaches the evaluated area boundary", trap_distance)
    return result


def bz_zero_crossing(
    source: MagnetSource,
    y_range: tuple[float, float] = (1e-3, 0.3),
    samples: int = 600,
    tolerance: float = 1e-6,
) -> float:
    """First y along (0, y, 0) where B_z changes sign, refined by bisection [m].

    Raises:
        AnalysisError: If B_z keeps one sign over the scanned range.
    """
    ys = np.linspace(y_range[0], y_range[1], samples)
    dipoles = [(np.asarray(m.center), moment_vector(m)) for m in magnets_of(source)]

    def bz(y: float) -> float:
        point = np.array([0.0, y, 0.0])
        return float(sum(dipole_flux(point - center, moment)[2] for center, moment in dipoles))

    values = np.array([bz(y) for y in ys])
    signs = np.sign(values)
    exact = np.flatnonzero(signs == 0)
    changes = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    if exact.size and (not changes.size or exact[0] <= changes[0]):
        return float(ys[exact[0]])
    if not changes.size:
        raise AnalysisError(f"B_z keeps one sign over y in [{y_range[0]:.4g}, {y_range[1]:.4g}] m")
    k = int(changes[0])
    return float(optimize.bisect(bz, ys[k], ys[k + 1], xtol=tolerance))


@dataclass(frozen=True)
class TrapAnalysis:
    """Metrics of one optimised trap.

    Attributes:
        center: Trap centre (x, y) [m].
        center_offset: Distance from the target trap point [m].
        avg_force: Mean ‖F‖ within the averaging radius [N].
        aspect: Low-force region shape, or None when no point is below the threshold.
        bz_crossing: First B_z sign change along +Y [m], or None.
        accuracy: Direction accuracy of the field on the evaluation grid.
    """
    center: tuple[float, float]
    center_offset: float
    avg_force: float
    aspect: AspectRatio | None
    bz_crossing: float | None
    accuracy: float


def analyze_trap(config: RunConfig, angles: Sequence[float], trap_distance_mm: float | None = None) -> TrapAnalysis:
    """Compute every single-trap metric for ``angles`` [degrees]."""
    distance = (trap_distance_mm if trap_distance_mm is not None else config.trap_distance_mm) * MM
    array = config.build_array().with_angles(angles)
    grid = config.build_grid(distance / MM)
    robot = config.robot()
    field = evaluate_grid(array, grid, robot)
    centre = trap_center(field, grid)
    output, flags = normalize_output(field)
    try:
        aspect: AspectRatio | None = trap_aspect_ratio(
            array, robot, distance, config.force_threshold_mn * 1e-3, config.half_width_mm * MM,
            config.fine_resolution,
        )
    except AnalysisError as exc:
        logger.warning("aspect ratio undefined: %s", exc)
        aspect = None
    try:
        crossing: float | None = bz_zero_crossing(array)
    except AnalysisError:
        crossing = None
    return TrapAnalysis(
        centre,
        float(math.hypot(centre[0], centre[1] - distance)),
        avg_force_in_radius(field, grid, (0.0, distance), config.avg_radius_mm * MM),
        aspect,
        crossing,
        accuracy(output, build_target(grid), flags),
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    """One optimised trap of a sweep.

    Attributes:
        distance_mm: Trap distance [mm].
        magnets: Magnet count.
        angles: Solution angles [degrees], unwrapped along the distance axis.
        loss: Final loss.
        accuracy: Final accuracy.
        avg_force: Mean ‖F‖ within the averaging radius [N].
        aspect_ratio: Raw aspect ratio.
        aspect_ratio_smoothed: Centred moving average of the aspect ratio.
        truncated: Low-force region reached the area boundary.
        seconds: Optimisation wall-clock time.
        error: Failure reason, empty on success.
        branch: 0 for the optimised solution, 1 for its z-reflected twin.
    """
    distance_mm: float
    magnets: int
    angles: tuple[float, ...]
    loss: float
    accuracy: float
    avg_force: float
    aspect_ratio: float
    aspect_ratio_smoothed: float = math.nan
    truncated: bool = False
    seconds: float = field(default=0.0, compare=False)
    error: str = ""
    branch: int = 0


def moving_average(values: Sequence[float], window: int) -> FloatArray:
    """Centred moving average ignoring NaN; the window shrinks at the ends."""
    data = np.asarray(values, dtype=np.float64)
    half = window // 2
    out = np.full(data.size, np.nan)
    for k in range(data.size):
        chunk = data[max(0, k - half): k + half + 1]
        finite = chunk[np.isfinite(chunk)]
        if finite.size:
            out[k] = float(finite.mean())
    return out


def parse_distances(text: str) -> list[float]:
    """Parse ``start:stop:count`` or a comma list of distances [mm].

    Raises:
        ValueError: If the text is malformed.
    """
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("distance count must be at least 1")
        return [float(d) for d in np.linspace(start, stop, count)]
    return [float(d) for d in text.split(",") if d.strip()]


def _optimize(
    config: RunConfig,
    array: MagnetArray,
    grid: EvaluationGrid,
    warm_start: Sequence[float] | None,
) -> OptimizationReport:
    robot = config.robot()
    if config.lambda2 == 0:
        return multi_restart(
            grid, robot, array, config.loss_config(), config.restart_policy(), config.adam_state(), warm_start
        )
    _, report = tune_force_target(
        grid, robot, array, config.restart_policy(), config.gamma, config.adam_state(), warm_start,
        direction_weight=config.lambda1, magnitude_weight=config.lambda2,
    )
    return report


def distance_sweep(config: RunConfig, distances_mm: Sequence[float], counts: Sequence[int]) -> list[SweepRow]:
    """Optimise a trap at every (distance, magnet count) pair.

    Distances are visited in the given order for each count, each run seeded
    with the previous solution so the angles follow a continuous branch; the
    random restarts take over when that start falls below the threshold. Angle
    columns are unwrapped along the distance axis and the aspect ratio gains a
    centred moving average. Failed points are recorded with NaN metrics.

    Every solved point also yields its z-reflected twin, which produces the
    same in-plane force field; the twins form the second solution branch and
    share the metrics of the point they mirror.

    Returns:
        Rows ordered by count, then branch (0 as optimised, 1 mirrored), then distance.
    """
    rows: list[SweepRow] = []
    robot = config.robot()
    for count in counts:
        array = config.build_array(count)
        previous: Sequence[float] | None = None
        block: list[SweepRow] = []
        for distance in distances_mm:
            started = time.perf_counter()
            try:
                grid = config.build_grid(distance)
                report = _optimize(config, array, grid, previous)
                solved = array.with_angles(report.angles)
                field_ = evaluate_grid(solved, grid, robot)
                avg = avg_force_in_radius(field_, grid, (0.0, distance * MM), config.avg_radius_mm * MM)
                try:
                    aspect = trap_aspect_ratio(
                        solved, robot, distance * MM, config.force_threshold_mn * 1e-3, config.half_width_mm * MM,
                        config.fine_resolution,
                    )
                    ratio, truncated = aspect.ratio, aspect.truncated
                except AnalysisError:
                    ratio, truncated = math.nan, False
                previous = report.angles
                row = SweepRow(
                    distance, count, report.angles, report.loss, report.accuracy, avg, ratio,
                    truncated=truncated, seconds=time.perf_counter() - started,
                )
            except MagtrapError as exc:
                logger.warning("sweep point %.2f mm with %d magnets failed: %s", distance, count, exc)
                row = SweepRow(
                    distance, count, (), math.nan, math.nan, math.nan, math.nan,
                    seconds=time.perf_counter() - started, error=str(exc),
                )
            logger.info("sweep %d magnets at %.2f mm: accuracy %.4f", count, distance, row.accuracy)
            block.append(row)
        rows.extend(_finish_block(block, count, config.smoothing_window))
        rows.extend(_finish_block(block, count, config.smoothing_window, branch=1))
    return rows


def _finish_block(block: list[SweepRow], count: int, window: int, branch: int = 0) -> list[SweepRow]:
    smoothed = moving_average([r.aspect_ratio for r in block], window)
    solved = [i for i, r in enumerate(block) if r.angles]
    unwrapped = np.full((len(block), count), np.nan)
    if solved:
        raw = [block[i].angles if branch == 0 else mirror_angles(block[i].angles) for i in solved]
        unwrapped[solved] = np.unwrap(np.array(raw), period=360.0, axis=0)
    finished = []
    for i, row in enumerate(block):
        angles = tuple(float(a) for a in unwrapped[i]) if row.angles else ()
        finished.append(replace(row, angles=angles, aspect_ratio_smoothed=float(smoothed[i]), branch=branch))
    return finished
