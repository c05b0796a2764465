"""Array layout, moment vectors, and evaluation grids."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from .constants import GRID_EPS
from .enums import Plane
from .errors import GeometryError
from .models import EvaluationGrid, FloatArray, Magnet, MagnetArray, normalize_angle

logger = logging.getLogger(__name__)


def face_diagonal(edge_length: float) -> float:
    """Face diagonal √2·l of a cube [m]."""
    return math.sqrt(2.0) * edge_length


def build_array(
    n: int,
    edge_length: float,
    remanence: float,
    extra_spacing: float = 0.0,
    pitch_override: float | None = None,
) -> MagnetArray:
    """Lay out ``n`` identical cubes symmetrically about the origin on the Z axis.

    Magnet k on either side (k = 1..n/2) sits at z = ±(2k−1)/2 · pitch. The
    pitch is ``pitch_override`` when given, otherwise the face diagonal plus
    ``extra_spacing``. All angles start at 0.

    Args:
        n: Even magnet count, at least 2.
        edge_length: Cube edge length [m].
        remanence: Cube remanence [T].
        extra_spacing: Gap added to the face diagonal [m].
        pitch_override: Explicit centre-to-centre spacing [m].

    Returns:
        The array in canonical order (descending z).

    Raises:
        GeometryError: If ``n`` is odd or below 2, or the pitch is below the face diagonal.
    """
    if n < 2 or n % 2:
        raise GeometryError(f"magnet count must be even and at least 2, got {n}")
    if not edge_length > 0:
        raise GeometryError(f"edge_length must be positive, got {edge_length}")
    pitch = pitch_override if pitch_override is not None else face_diagonal(edge_length) + extra_spacing
    if pitch < face_diagonal(edge_length) * (1.0 - 1e-12):
        raise GeometryError(
            f"pitch {pitch:.6g} m is below the face diagonal {face_diagonal(edge_length):.6g} m; "
            "magnets would collide when rotated"
        )
    magnets = []
    for k in range(1, n // 2 + 1):
        z = (2 * k - 1) / 2.0 * pitch
        magnets.append(Magnet((0.0, 0.0, z), edge_length, remanence))
        magnets.append(Magnet((0.0, 0.0, -z), edge_length, remanence))
    array = MagnetArray(tuple(magnets), pitch, extra_spacing)
    logger.debug("built %d-magnet array, pitch %.4g m", n, pitch)
    return array


def moment_vector(magnet: Magnet) -> FloatArray:
    """Moment of ``magnet``: R_x(α)·(0, 0, Br·l³/μ₀) [A·m²]."""
    alpha = math.radians(magnet.angle)
    magnitude = magnet.moment_magnitude
    return np.array([0.0, -magnitude * math.sin(alpha), magnitude * math.cos(alpha)])


def mirror_angles(angles: Sequence[float]) -> tuple[float, ...]:
    """Angles of the z-reflected array, which produces the same in-plane force field.

    The magnet at z takes the place of the one at -z, turned to 360 - alpha.
    """
    return tuple(normalize_angle(360.0 - float(a)) for a in reversed(angles))


def inside_magnet(point: FloatArray, magnet: Magnet) -> bool:
    """Whether ``point`` lies within the rotated cube of ``magnet``."""
    rel = np.asarray(point, dtype=np.float64) - np.asarray(magnet.center)
    alpha = math.radians(magnet.angle)
    c, s = math.cos(alpha), math.sin(alpha)
    # Rotate back into the magnet frame about X.
    local = np.array([rel[0], c * rel[1] + s * rel[2], -s * rel[1] + c * rel[2]])
    return bool(np.all(np.abs(local) <= magnet.edge_length / 2.0))


def _axis(center: float, half_width: float, count: int) -> FloatArray:
    return center + np.linspace(-half_width, half_width, count)


def build_grid(y_trap: float, half_width: float, columns: int = 20, rows: int = 20) -> EvaluationGrid:
    """Build the trap-centred XY grid S at z = 0.

    Args:
        y_trap: Trap distance from the array axis [m].
        half_width: Half the side of the square area [m].
        columns: Points along X (i).
        rows: Points along Y (j).

    Returns:
        A grid around (0, y_trap, 0), stored row by row.

    Raises:
        GeometryError: If the bounds are not positive or a point lands on the trap.
    """
    if not half_width > 0:
        raise GeometryError(f"half_width must be positive, got {half_width}")
    if columns < 1 or rows < 1:
        raise GeometryError("grid resolution must be at least 1x1")
    xs = _axis(0.0, half_width, columns)
    ys = _axis(y_trap, half_width, rows)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    trap = np.array([0.0, y_trap, 0.0])
    gap = np.linalg.norm(points - trap, axis=1)
    if np.any(gap < GRID_EPS):
        raise GeometryError(
            f"a {columns}x{rows} grid puts a point on the trap; use an even resolution on at least one axis"
        )
    return EvaluationGrid(points, columns, rows, half_width, (0.0, y_trap, 0.0), Plane.XY)


def plane_grid(
    plane: Plane,
    u_range: tuple[float, float],
    v_range: tuple[float, float],
    columns: int,
    rows: int,
) -> EvaluationGrid:
    """Build a rectangular sample of a coordinate plane for field dumps.

    XY is sampled at z = 0 with u = x, v = y; YZ is sampled at x = 0 with
    u = y, v = z.

    Args:
        plane: Plane to sample.
        u_range: (min, max) of the first in-plane coordinate [m].
        v_range: (min, max) of the second in-plane coordinate [m].
        columns: Samples along u.
        rows: Samples along v.

    Returns:
        A grid without a trap point.

    Raises:
        GeometryError: If a range is inverted or the resolution is below 1.
    """
    if u_range[0] > u_range[1] or v_range[0] > v_range[1]:
        raise GeometryError("plane ranges must be ordered (min, max)")
    if columns < 1 or rows < 1:
        raise GeometryError("grid resolution must be at least 1x1")
    gu, gv = np.meshgrid(np.linspace(*u_range, columns), np.linspace(*v_range, rows))
    zeros = np.zeros(gu.size)
    if plane is Plane.XY:
        points = np.column_stack([gu.ravel(), gv.ravel(), zeros])
    else:
        points = np.column_stack([zeros, gu.ravel(), gv.ravel()])
    half = max(u_range[1] - u_range[0], v_range[1] - v_range[0]) / 2.0
    return EvaluationGrid(points, columns, rows, half, None, plane)
