"""Tests for array layout, magnet moments, and evaluation grids."""

import math

import numpy as np
import pytest

from magtrap import (
    GeometryError, Magnet, MagnetArray, Plane, build_array, build_grid, evaluate_grid, moment_vector, plane_grid,
)
from magtrap.constants import MU_0
from magtrap.geometry import face_diagonal, inside_magnet, mirror_angles

MM = 1e-3

# ---------------------------------------------------------------------------
# Array layout
# ---------------------------------------------------------------------------

class TestBuildArray:
    @pytest.mark.parametrize("n,edge,spacing,pitch,expected_z", [
        pytest.param(2, 50.8 * MM, 0.0, 120.0 * MM, [60.0 * MM, -60.0 * MM], id="prototype_pitch_override"),
        pytest.param(
            2, 10.0 * MM, 0.0, None, [math.sqrt(2) * 10 * MM / 2, -math.sqrt(2) * 10 * MM / 2],
            id="face_diagonal_pitch",
        ),
        pytest.param(4, 10.0 * MM, 0.0, 20.0 * MM, [30 * MM, 10 * MM, -10 * MM, -30 * MM], id="four_magnet_ladder"),
        pytest.param(
            2, 10.0 * MM, 5.0 * MM, None,
            [(math.sqrt(2) * 10 + 5) * MM / 2, -(math.sqrt(2) * 10 + 5) * MM / 2],
            id="extra_spacing",
        ),
    ])
    def test_centers(self, n, edge, spacing, pitch, expected_z):
        array = build_array(n, edge, 1.0, spacing, pitch)
        assert array.centers[:, 2] == pytest.approx(expected_z, rel=1e-12)
        assert np.all(array.centers[:, :2] == 0.0)

    def test_angles_start_at_zero(self):
        assert np.all(build_array(6, 10 * MM, 1.0).angles == 0.0)

    def test_face_diagonal(self):
        assert face_diagonal(10 * MM) == pytest.approx(14.142135623730951 * MM)

    @pytest.mark.parametrize("n", [
        pytest.param(0, id="zero"),
        pytest.param(1, id="one"),
        pytest.param(3, id="odd"),
    ])
    def test_rejects_bad_counts(self, n):
        with pytest.raises(GeometryError):
            build_array(n, 10 * MM, 1.0)

    def test_rejects_pitch_below_face_diagonal(self):
        with pytest.raises(GeometryError, match="face diagonal"):
            build_array(2, 10 * MM, 1.0, pitch_override=12 * MM)

    def test_rejects_non_positive_edge(self):
        with pytest.raises(GeometryError):
            build_array(2, 0.0, 1.0)

    def test_canonical_order_ignores_input_order(self):
        array = build_array(4, 10 * MM, 1.0, pitch_override=20 * MM)
        reordered = MagnetArray(tuple(reversed(array.magnets)), array.pitch)
        assert reordered == array
        assert list(reordered.centers[:, 2]) == sorted(reordered.centers[:, 2], reverse=True)

    def test_rejects_asymmetric_layout(self):
        magnets = (Magnet((0, 0, 0.02), 0.01, 1.0), Magnet((0, 0, -0.03), 0.01, 1.0))
        with pytest.raises(GeometryError, match="symmetric"):
            MagnetArray(magnets, 0.05)

    def test_with_angles_checks_length(self):
        with pytest.raises(GeometryError):
            build_array(2, 10 * MM, 1.0).with_angles([1.0, 2.0, 3.0])

    def test_with_angles_normalises(self):
        array = build_array(2, 10 * MM, 1.0).with_angles([-19.0, 721.0])
        assert list(array.angles) == [341.0, 1.0]


# ---------------------------------------------------------------------------
# Moment vectors
# ---------------------------------------------------------------------------

class TestMomentVector:
    @pytest.mark.parametrize("angle,expected", [
        pytest.param(0.0, (0.0, 0.0, 1e-6 / MU_0), id="along_z"),
        pytest.param(90.0, (0.0, -1e-6 / MU_0, 0.0), id="quarter_turn"),
        pytest.param(180.0, (0.0, 0.0, -1e-6 / MU_0), id="half_turn"),
    ])
    def test_examples(self, angle, expected):
        m = moment_vector(Magnet((0, 0, 0), 0.01, 1.0, angle))
        assert m == pytest.approx(expected, abs=1e-12)

    def test_unit_magnet_magnitude(self):
        assert Magnet((0, 0, 0), 0.01, 1.0).moment_magnitude == pytest.approx(0.7957747, rel=1e-6)

    def test_prototype_angle(self):
        magnet = Magnet((0, 0, 0), 0.0508, 1.275, 341.0)
        m = moment_vector(magnet)
        assert m[0] == 0.0
        assert m[1] > 0.0
        assert np.linalg.norm(m) == pytest.approx(1.275 * 0.0508**3 / MU_0, rel=1e-12)

    @pytest.mark.parametrize("angle", [0.0, 30.0, 45.5, 341.0, 359.0])
    def test_full_turn_is_bit_identical(self, angle):
        a = moment_vector(Magnet((0, 0, 0), 0.01, 1.0, angle))
        b = moment_vector(Magnet((0, 0, 0), 0.01, 1.0, angle + 360.0))
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("angle", [12.5, 97.0, 200.0, 333.3])
    def test_norm_preserved(self, angle):
        m = moment_vector(Magnet((0, 0, 0), 0.02, 1.3, angle))
        assert np.linalg.norm(m) == pytest.approx(1.3 * 0.02**3 / MU_0, rel=1e-12)

    @pytest.mark.parametrize("angle", [10.0, 75.0, 140.0])
    def test_rotation_parity(self, angle):
        plus = moment_vector(Magnet((0, 0, 0), 0.01, 1.0, angle))
        minus = moment_vector(Magnet((0, 0, 0), 0.01, 1.0, -angle))
        assert minus[1] == pytest.approx(-plus[1], rel=1e-12)
        assert minus[2] == pytest.approx(plus[2], rel=1e-12)


# ---------------------------------------------------------------------------
# Magnet volume
# ---------------------------------------------------------------------------

class TestMirrorAngles:
    @pytest.mark.parametrize("angles,expected", [
        pytest.param((341.0, 19.0), (341.0, 19.0), id="prototype_is_its_own_twin"),
        pytest.param((10.0, 20.0, 30.0, 40.0), (320.0, 330.0, 340.0, 350.0), id="order_reversed"),
        pytest.param((0.0, 180.0), (180.0, 0.0), id="zero_stays_zero"),
    ])
    def test_examples(self, angles, expected):
        assert mirror_angles(angles) == pytest.approx(expected)

    def test_involution(self):
        angles = (12.5, 200.0, 359.0, 90.0)
        assert mirror_angles(mirror_angles(angles)) == pytest.approx(angles)

    def test_in_plane_forces_unchanged(self, robot, trap_grid):
        array = build_array(4, 50.8 * MM, 1.32).with_angles([30.0, 75.0, 190.0, 300.0])
        twin = array.with_angles(mirror_angles(array.angles))
        original = evaluate_grid(array, trap_grid, robot).forces
        mirrored = evaluate_grid(twin, trap_grid, robot).forces
        np.testing.assert_allclose(mirrored[:, :2], original[:, :2], rtol=1e-9, atol=1e-12)


class TestInsideMagnet:
    def test_center_is_inside(self):
        assert inside_magnet(np.zeros(3), Magnet((0, 0, 0), 0.01, 1.0))

    def test_beyond_face_is_outside(self):
        assert not inside_magnet(np.array([0.0, 0.006, 0.0]), Magnet((0, 0, 0), 0.01, 1.0))

    def test_rotation_moves_the_faces(self):
        point = np.array([0.0, 0.006, 0.0])
        assert inside_magnet(point, Magnet((0, 0, 0), 0.01, 1.0, 45.0))


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

class TestBuildGrid:
    def test_default_grid(self, trap_grid):
        assert len(trap_grid) == 400
        assert np.all(trap_grid.points[:, 2] == 0.0)
        assert trap_grid.trap_point == (0.0, 89 * MM, 0.0)
        assert trap_grid.points[:, 0].min() == pytest.approx(-10 * MM)
        assert trap_grid.points[:, 1].max() == pytest.approx(99 * MM)

    def test_row_major_order(self, trap_grid):
        image = trap_grid.as_image(trap_grid.points)
        assert np.all(image[0, :, 1] == image[0, 0, 1])
        assert np.all(np.diff(image[0, :, 0]) > 0)

    def test_even_spacing(self, trap_grid):
        xs = np.unique(trap_grid.points[:, 0])
        assert np.allclose(np.diff(xs), 20 * MM / 19)

    def test_never_contains_trap(self, trap_grid):
        gap = np.linalg.norm(trap_grid.points - np.array(trap_grid.trap_point), axis=1)
        assert gap.min() > 1e-9

    @pytest.mark.parametrize("columns,rows", [
        pytest.param(3, 3, id="odd_odd"),
        pytest.param(5, 7, id="odd_odd_rectangular"),
    ])
    def test_rejects_point_on_trap(self, columns, rows):
        with pytest.raises(GeometryError, match="trap"):
            build_grid(89 * MM, 10 * MM, columns, rows)

    def test_single_point_grid_sits_at_the_corner(self):
        grid = build_grid(89 * MM, 10 * MM, 1, 1)
        assert grid.points[0] == pytest.approx([-10 * MM, 79 * MM, 0.0])

    def test_odd_by_even_is_allowed(self):
        assert len(build_grid(89 * MM, 10 * MM, 3, 4)) == 12

    def test_rejects_non_positive_width(self):
        with pytest.raises(GeometryError):
            build_grid(89 * MM, 0.0)

    def test_points_are_read_only(self, trap_grid):
        with pytest.raises(ValueError):
            trap_grid.points[0, 0] = 1.0


class TestPlaneGrid:
    def test_yz_plane(self):
        grid = plane_grid(Plane.YZ, (0.0, 0.1), (-0.05, 0.05), 5, 3)
        assert len(grid) == 15
        assert np.all(grid.points[:, 0] == 0.0)
        assert grid.trap_point is None
        assert grid.plane is Plane.YZ

    def test_xy_plane(self):
        grid = plane_grid(Plane.XY, (-0.01, 0.01), (0.08, 0.1), 4, 4)
        assert np.all(grid.points[:, 2] == 0.0)

    def test_rejects_inverted_range(self):
        with pytest.raises(GeometryError):
            plane_grid(Plane.XY, (0.1, 0.0), (0.0, 0.1), 2, 2)
