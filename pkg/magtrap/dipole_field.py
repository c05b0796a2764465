"""Point-dipole flux density and dipole-dipole force on the trapped magnet."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .constants import DIPOLE_VALIDITY_FACTOR, FIELD_EPS, MU_0, SINGULAR_EPS
from .errors import DegenerateFieldError, FieldEvaluationError, MagtrapError, SingularityError
from .geometry import inside_magnet, moment_vector
from .models import EvaluationGrid, FieldDump, FloatArray, ForceField, Magnet, MagnetArray, RobotMagnet

logger = logging.getLogger(__name__)

MagnetSource = MagnetArray | Sequence[Magnet]

_FIELD_PREFACTOR = MU_0 / (4.0 * math.pi)
_FORCE_PREFACTOR = 3.0 * MU_0 / (4.0 * math.pi)


def magnets_of(source: MagnetSource) -> tuple[Magnet, ...]:
    """Return the magnets of an array or a plain magnet sequence."""
    if isinstance(source, MagnetArray):
        return source.magnets
    return tuple(source)


# ---------------------------------------------------------------------------
# Single-pair kernels
# ---------------------------------------------------------------------------

def dipole_flux(r: FloatArray, moment: FloatArray) -> FloatArray:
    """Flux density μ₀/(4π‖r‖³)·(3r̂r̂ᵀ − I)·m at offset ``r`` from a dipole [T]."""
    r = np.asarray(r, dtype=np.float64)
    dist = float(np.linalg.norm(r))
    if dist < SINGULAR_EPS:
        raise SingularityError(r, "flux density is singular at the dipole centre")
    rhat = r / dist
    return np.asarray(_FIELD_PREFACTOR / dist**3 * (3.0 * rhat * (rhat @ moment) - moment))


def dipole_force(r: FloatArray, source: FloatArray, target: FloatArray) -> FloatArray:
    """Force on dipole ``target`` at offset ``r`` from dipole ``source`` [N].

    Uses 3μ₀/(4π‖r‖⁴)·[(r̂·mₜ)mₛ + (r̂·mₛ)mₜ + (mₛ·mₜ − 5(r̂·mₛ)(r̂·mₜ))r̂],
    which equals ∇(mₜ·B) for the field of ``source``.
    """
    r = np.asarray(r, dtype=np.float64)
    dist = float(np.linalg.norm(r))
    if dist < SINGULAR_EPS:
        raise SingularityError(r, "dipole force is singular at zero separation")
    rhat = r / dist
    rs = rhat @ source
    rt = rhat @ target
    bracket = rt * source + rs * target + (source @ target - 5.0 * rs * rt) * rhat
    return np.asarray(_FORCE_PREFACTOR / dist**4 * bracket)


# ---------------------------------------------------------------------------
# Per-point operations
# ---------------------------------------------------------------------------

def _check_proximity(dist: float, magnet: Magnet) -> None:
    if dist < DIPOLE_VALIDITY_FACTOR * magnet.space_diagonal:
        logger.warning(
            "point %.4g m from a magnet centre is inside the dipole validity bound %.4g m",
            dist,
            DIPOLE_VALIDITY_FACTOR * magnet.space_diagonal,
        )


def flux_density_single(point: FloatArray, magnet: Magnet) -> FloatArray:
    """Flux density of one magnet at ``point`` [T].

    Raises:
        SingularityError: If ``point`` is the magnet centre.
    """
    r = np.asarray(point, dtype=np.float64) - np.asarray(magnet.center)
    dist = float(np.linalg.norm(r))
    if dist < SINGULAR_EPS:
        raise SingularityError(point, f"point {tuple(point)} coincides with a magnet centre")
    _check_proximity(dist, magnet)
    return dipole_flux(r, moment_vector(magnet))


def flux_density_total(point: FloatArray, source: MagnetSource) -> FloatArray:
    """Superposed flux density of every magnet at ``point`` [T]."""
    total = np.zeros(3)
    for magnet in magnets_of(source):
        total = total + flux_density_single(point, magnet)
    return total


def robot_moment(
    point: FloatArray,
    source: MagnetSource,
    robot: RobotMagnet,
    field_eps: float = FIELD_EPS,
) -> FloatArray:
    """Moment of the robot aligned with the local field: (Br·V/μ₀)·B̂ [A·m²].

    Raises:
        DegenerateFieldError: If ‖B‖ ≤ ``field_eps``.
    """
    b = flux_density_total(point, source)
    norm = float(np.linalg.norm(b))
    if norm <= field_eps:
        raise DegenerateFieldError(point, f"flux density {norm:.3g} T is too weak to orient the robot")
    return robot.moment_magnitude * b / norm


def force_single(point: FloatArray, magnet: Magnet, moment: FloatArray) -> FloatArray:
    """Force exerted by one magnet on a robot of moment ``moment`` at ``point`` [N]."""
    r = np.asarray(point, dtype=np.float64) - np.asarray(magnet.center)
    if float(np.linalg.norm(r)) < SINGULAR_EPS:
        raise SingularityError(point, f"point {tuple(point)} coincides with a magnet centre")
    return dipole_force(r, moment_vector(magnet), np.asarray(moment, dtype=np.float64))


def force_total(point: FloatArray, source: MagnetSource, robot: RobotMagnet) -> FloatArray:
    """Total force on the self-aligned robot at ``point`` [N]."""
    m_ij = robot_moment(point, source, robot)
    total = np.zeros(3)
    for magnet in magnets_of(source):
        total = total + force_single(point, magnet, m_ij)
    return total


# ---------------------------------------------------------------------------
# Vectorised kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelState:
    """Field quantities for one angle vector over the kernel's points.

    Attributes:
        flux: B per point, shape (g, 3) [T].
        flux_norm: ‖B‖ per point [T].
        gradient: Symmetric field-gradient tensor ∇B per point, shape (g, 3, 3) [T/m].
        moment: Robot moment per point [A·m²].
        forces: Force per point [N].
        degenerate: Points whose field was too weak to orient the robot.
    """
    flux: FloatArray
    flux_norm: FloatArray
    gradient: FloatArray
    moment: FloatArray
    forces: FloatArray
    degenerate: np.ndarray


class FieldKernel:
    """Precomputed dipole geometry for a fixed point set and magnet layout.

    B and ∇B are linear in every magnet moment, and a magnet at angle α has
    moment cos α·M·ẑ + sin α·M·(−ŷ). The kernel therefore stores each
    magnet's contribution for those two basis moments and evaluates any angle
    vector as a weighted sum. Angles passed to the kernel are in radians.
    """

    def __init__(
        self,
        points: FloatArray,
        source: MagnetSource,
        robot: RobotMagnet,
        field_eps: float = FIELD_EPS,
    ) -> None:
        """Build the per-magnet basis fields.

        Args:
            points: Evaluation points, shape (g, 3) [m].
            source: Array or magnet sequence; only positions and sizes are used.
            robot: Trapped magnet.
            field_eps: Degeneracy bound on ‖B‖ [T].

        Raises:
            SingularityError: If a point coincides with a magnet centre; carries its index.
        """
        magnets = magnets_of(source)
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.robot = robot
        self.field_eps = field_eps
        centers = np.array([m.center for m in magnets], dtype=np.float64)
        magnitudes = np.array([m.moment_magnitude for m in magnets], dtype=np.float64)

        r = self.points[:, None, :] - centers[None, :, :]
        dist = np.linalg.norm(r, axis=2)
        bad = np.argwhere(dist < SINGULAR_EPS)
        if bad.size:
            g = int(bad[0, 0])
            raise SingularityError(self.points[g], f"point {g} coincides with a magnet centre", index=g)
        bound = DIPOLE_VALIDITY_FACTOR * np.array([m.space_diagonal for m in magnets])
        close = int(np.count_nonzero(np.any(dist < bound[None, :], axis=1)))
        if close:
            logger.warning("%d of %d points lie inside the dipole validity bound", close, len(self.points))

        rhat = r / dist[..., None]
        e_cos = np.zeros((len(magnets), 3))
        e_cos[:, 2] = magnitudes
        e_sin = np.zeros((len(magnets), 3))
        e_sin[:, 1] = -magnitudes
        self._flux_cos, self._grad_cos = self._basis(rhat, dist, e_cos)
        self._flux_sin, self._grad_sin = self._basis(rhat, dist, e_sin)

    @staticmethod
    def _basis(rhat: FloatArray, dist: FloatArray, moments: FloatArray) -> tuple[FloatArray, FloatArray]:
        proj = np.einsum("gnk,nk->gn", rhat, moments)
        flux = (_FIELD_PREFACTOR / dist**3)[..., None] * (3.0 * rhat * proj[..., None] - moments[None, :, :])
        eye = np.eye(3)
        outer = rhat[..., :, None] * rhat[..., None, :]
        tensor = (
            moments[None, :, :, None] * rhat[..., None, :]
            + rhat[..., :, None] * moments[None, :, None, :]
            + proj[..., None, None] * (eye - 5.0 * outer)
        )
        grad = (_FORCE_PREFACTOR / dist**4)[..., None, None] * tensor
        return flux, grad

    def __len__(self) -> int:
        """Number of points."""
        return int(self.points.shape[0])

    @property
    def magnet_count(self) -> int:
        """Number of magnets the kernel was built for."""
        return int(self._flux_cos.shape[1])

    def flux(self, angles: FloatArray) -> FloatArray:
        """Flux density per point for ``angles`` [rad], shape (g, 3)."""
        c, s = np.cos(angles), np.sin(angles)
        return np.asarray(np.einsum("gnk,n->gk", self._flux_cos, c) + np.einsum("gnk,n->gk", self._flux_sin, s))

    def evaluate(self, angles: FloatArray, strict: bool = True) -> KernelState:
        """Evaluate field, robot moment, and force for ``angles`` [rad].

        Args:
            angles: One angle per magnet, radians.
            strict: Raise on degenerate points; otherwise give them zero moment and force.

        Returns:
            The per-point field quantities.

        Raises:
            DegenerateFieldError: In strict mode, for the first point with ‖B‖ ≤ field_eps.
        """
        c, s = np.cos(angles), np.sin(angles)
        flux = np.einsum("gnk,n->gk", self._flux_cos, c) + np.einsum("gnk,n->gk", self._flux_sin, s)
        grad = np.einsum("gnkl,n->gkl", self._grad_cos, c) + np.einsum("gnkl,n->gkl", self._grad_sin, s)
        norm = np.linalg.norm(flux, axis=1)
        degenerate = norm <= self.field_eps
        if strict and np.any(degenerate):
            g = int(np.flatnonzero(degenerate)[0])
            raise DegenerateFieldError(
                self.points[g], f"flux density {norm[g]:.3g} T at point {g} is too weak to orient the robot", index=g
            )
        safe = np.where(degenerate, 1.0, norm)
        moment = self.robot.moment_magnitude * flux / safe[:, None]
        moment[degenerate] = 0.0
        forces = np.einsum("gkl,gl->gk", grad, moment)
        return KernelState(flux, norm, grad, moment, forces, degenerate)

    def forces_batch(self, angles: FloatArray) -> FloatArray:
        """Forces for a batch of angle vectors, shape (b, g, 3); degenerate points get zero force."""
        c, s = np.cos(angles), np.sin(angles)
        flux = np.einsum("gnk,bn->bgk", self._flux_cos, c) + np.einsum("gnk,bn->bgk", self._flux_sin, s)
        grad = np.einsum("gnkl,bn->bgkl", self._grad_cos, c) + np.einsum("gnkl,bn->bgkl", self._grad_sin, s)
        norm = np.linalg.norm(flux, axis=2)
        degenerate = norm <= self.field_eps
        moment = self.robot.moment_magnitude * flux / np.where(degenerate, 1.0, norm)[..., None]
        moment[degenerate] = 0.0
        return np.asarray(np.einsum("bgkl,bgl->bgk", grad, moment))

    def angle_gradient(self, state: KernelState, angles: FloatArray, force_grad: FloatArray) -> FloatArray:
        """Pull a per-point force cotangent back onto the angles.

        Args:
            state: Result of :meth:`evaluate` at ``angles``.
            angles: Angles [rad] the state was evaluated at.
            force_grad: ∂L/∂F per point, shape (g, 3).

        Returns:
            ∂L/∂α per magnet, per radian.
        """
        c, s = np.cos(angles), np.sin(angles)
        d_flux = self._flux_sin * c[None, :, None] - self._flux_cos * s[None, :, None]
        grad_m_cos = np.einsum("gnkl,gl->gnk", self._grad_cos, state.moment)
        grad_m_sin = np.einsum("gnkl,gl->gnk", self._grad_sin, state.moment)
        d_force = grad_m_sin * c[None, :, None] - grad_m_cos * s[None, :, None]
        direct = np.einsum("gk,gnk->n", force_grad, d_force)

        # The robot moment follows B̂, so F also moves through dm = (|m|/|B|)(I − B̂B̂ᵀ)dB.
        safe = np.where(state.degenerate, 1.0, state.flux_norm)
        bhat = state.flux / safe[:, None]
        hg = np.einsum("gkl,gl->gk", state.gradient, force_grad)
        projected = hg - bhat * np.einsum("gk,gk->g", bhat, hg)[:, None]
        weight = (self.robot.moment_magnitude / safe)[:, None] * projected
        weight[state.degenerate] = 0.0
        through_moment = np.einsum("gk,gnk->n", weight, d_flux)
        return np.asarray(direct + through_moment)


def angles_in_radians(source: MagnetArray) -> FloatArray:
    """The array's angles converted to radians."""
    return np.radians(source.angles)


# ---------------------------------------------------------------------------
# Grid evaluation
# ---------------------------------------------------------------------------

def evaluate_grid(array: MagnetArray, grid: EvaluationGrid, robot: RobotMagnet) -> ForceField:
    """Force and flux density at every grid point, in grid order.

    Raises:
        FieldEvaluationError: Naming the first point that is singular or degenerate.
    """
    try:
        kernel = FieldKernel(grid.points, array, robot)
        state = kernel.evaluate(angles_in_radians(array))
    except (SingularityError, DegenerateFieldError) as exc:
        index = exc.index if exc.index is not None else -1
        raise FieldEvaluationError(index, exc.point, exc) from exc
    return ForceField(state.forces, grid, state.flux)


def evaluate_plane(array: MagnetArray, grid: EvaluationGrid, robot: RobotMagnet) -> FieldDump:
    """Evaluate a plane sample, recording per-point failures instead of raising.

    Points inside a magnet volume get an error row; points with a degenerate
    field keep their flux density but get no force.
    """
    errors = ["" for _ in range(len(grid))]
    for g, point in enumerate(grid.points):
        for n, magnet in enumerate(array.magnets):
            if inside_magnet(point, magnet):
                errors[g] = f"inside magnet {n + 1}"
                break
    valid = np.array([not e for e in errors])
    forces = np.full((len(grid), 3), np.nan)
    flux = np.full((len(grid), 3), np.nan)
    if np.any(valid):
        try:
            kernel = FieldKernel(grid.points[valid], array, robot)
        except MagtrapError as exc:  # pragma: no cover - inside-volume check catches centres first
            raise FieldEvaluationError(-1, getattr(exc, "point", (math.nan,) * 3), exc) from exc
        state = kernel.evaluate(angles_in_radians(array), strict=False)
        flux[valid] = state.flux
        valid_forces = state.forces.copy()
        valid_forces[state.degenerate] = np.nan
        forces[valid] = valid_forces
        for local, g in enumerate(np.flatnonzero(valid)):
            if state.degenerate[local]:
                errors[g] = "degenerate field"
    if any(errors):
        logger.info("%d of %d plane points could not be evaluated", sum(1 for e in errors if e), len(grid))
    return FieldDump(grid, forces, flux, tuple(errors))
