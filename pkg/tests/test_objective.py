"""Tests for target directions, the composite loss, and accuracy."""

import numpy as np
import pytest

from magtrap import (
    GeometryError,
    LossConfig,
    Plane,
    TrapObjective,
    accuracy,
    build_target,
    direction_loss,
    evaluate_grid,
    magnitude_loss,
    plane_grid,
    total_loss,
)
from magtrap.models import TargetField
from magtrap.objective import normalize_output


def random_units(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


@pytest.fixture
def x_target():
    return TargetField(np.tile([1.0, 0.0, 0.0], (8, 1)))


# ---------------------------------------------------------------------------
# Target field
# ---------------------------------------------------------------------------

class TestBuildTarget:
    def test_points_towards_trap(self, trap_grid):
        target = build_target(trap_grid)
        expected = np.array(trap_grid.trap_point) - trap_grid.points
        expected /= np.linalg.norm(expected, axis=1)[:, None]
        np.testing.assert_allclose(target.vectors, expected)
        assert np.allclose(np.linalg.norm(target.vectors, axis=1), 1.0)

    def test_needs_trap_point(self):
        grid = plane_grid(Plane.XY, (-0.01, 0.01), (0.08, 0.1), 2, 2)
        with pytest.raises(GeometryError):
            build_target(grid)

    def test_rejects_non_unit_vectors(self):
        with pytest.raises(GeometryError):
            TargetField(np.array([[2.0, 0.0, 0.0]]))


# ---------------------------------------------------------------------------
# Direction loss and accuracy
# ---------------------------------------------------------------------------

class TestDirectionLoss:
    @pytest.mark.parametrize("output,expected_loss,expected_accuracy", [
        pytest.param([1.0, 0.0, 0.0], 0.0, 1.0, id="aligned"),
        pytest.param([-1.0, 0.0, 0.0], 4.0, 0.0, id="antipodal"),
        pytest.param([0.0, 1.0, 0.0], 2.0, 0.5, id="orthogonal"),
    ])
    def test_reference_values(self, x_target, output, expected_loss, expected_accuracy):
        out = np.tile(output, (8, 1))
        assert direction_loss(out, x_target) == pytest.approx(expected_loss)
        assert accuracy(out, x_target) == pytest.approx(expected_accuracy)

    def test_cosine_identity(self):
        rng = np.random.default_rng(1)
        out, tgt = random_units(rng, 200), random_units(rng, 200)
        loss = direction_loss(out, TargetField(tgt))
        assert loss == pytest.approx(2.0 - 2.0 * np.mean(np.sum(out * tgt, axis=1)), abs=1e-12)

    def test_zero_force_points_charge_the_margin(self, x_target):
        out = np.tile([1.0, 0.0, 0.0], (8, 1))
        out[0] = 0.0
        flags = np.zeros(8, dtype=bool)
        flags[0] = True
        assert direction_loss(out, x_target, flags) == pytest.approx(2.0 / 8)
        assert direction_loss(out, x_target, flags, zero_force_margin=0.0) == pytest.approx(1.0 / 8)

    def test_shape_mismatch(self, x_target):
        with pytest.raises(ValueError, match="shape"):
            direction_loss(np.zeros((3, 3)), x_target)

    def test_accuracy_decreases_with_loss(self):
        rng = np.random.default_rng(4)
        tgt = TargetField(random_units(rng, 50))
        outputs = [random_units(rng, 50) for _ in range(10)]
        losses = [direction_loss(o, tgt) for o in outputs]
        accs = [accuracy(o, tgt) for o in outputs]
        order = np.argsort(losses)
        assert np.all(np.diff(np.array(accs)[order]) <= 0)

    def test_normalize_flags_zero_forces(self, prototype_array, robot, trap_grid):
        field = evaluate_grid(prototype_array, trap_grid, robot)
        unit, flags = normalize_output(field)
        assert not flags.any()
        np.testing.assert_allclose(np.linalg.norm(unit, axis=1), 1.0)


# ---------------------------------------------------------------------------
# Magnitude loss
# ---------------------------------------------------------------------------

class TestMagnitudeLoss:
    def test_exact_target(self, prototype_array, robot, trap_grid):
        field = evaluate_grid(prototype_array, trap_grid, robot)
        assert magnitude_loss(field, field.total_magnitude()) == 0.0

    def test_zero_target(self, prototype_array, robot, trap_grid):
        field = evaluate_grid(prototype_array, trap_grid, robot)
        assert magnitude_loss(field, 0.0) == pytest.approx(field.total_magnitude() ** 2)

    def test_doubling_remanence_quadruples_loss(self, prototype_array, robot, trap_grid):
        base = magnitude_loss(evaluate_grid(prototype_array, trap_grid, robot), 0.0)
        doubled = magnitude_loss(evaluate_grid(prototype_array.with_remanence_scale(2.0), trap_grid, robot), 0.0)
        assert doubled == pytest.approx(4.0 * base, rel=1e-10)


# ---------------------------------------------------------------------------
# Total loss
# ---------------------------------------------------------------------------

class TestTotalLoss:
    def test_direction_only(self, prototype_array, robot, trap_grid):
        field = evaluate_grid(prototype_array, trap_grid, robot)
        unit, flags = normalize_output(field)
        expected = 2.5 * direction_loss(unit, build_target(trap_grid), flags)
        cfg = LossConfig(direction_weight=2.5, magnitude_weight=0.0)
        assert total_loss(prototype_array, trap_grid, robot, cfg) == pytest.approx(expected, rel=1e-12)

    def test_magnitude_only_at_current_total(self, prototype_array, robot, trap_grid):
        total = evaluate_grid(prototype_array, trap_grid, robot).total_magnitude()
        cfg = LossConfig(direction_weight=0.0, magnitude_weight=1.0, force_target=total)
        assert total_loss(prototype_array, trap_grid, robot, cfg) == pytest.approx(0.0, abs=1e-24)

    def test_direction_loss_ignores_remanence_scale(self, prototype_array, robot, trap_grid):
        cfg = LossConfig()
        base = total_loss(prototype_array, trap_grid, robot, cfg)
        scaled = total_loss(prototype_array.with_remanence_scale(3.0), trap_grid, robot, cfg)
        assert scaled == pytest.approx(base, rel=1e-10)

    def test_invariant_under_grid_permutation(self, prototype_array, robot, trap_grid):
        order = np.random.default_rng(2).permutation(len(trap_grid))
        cfg = LossConfig()
        base = total_loss(prototype_array, trap_grid, robot, cfg)
        shuffled = total_loss(prototype_array, trap_grid.permuted(order), robot, cfg)
        assert shuffled == pytest.approx(base, rel=1e-12)

    @pytest.mark.parametrize("kwargs", [
        pytest.param({"direction_weight": -1.0}, id="negative_weight"),
        pytest.param({"direction_weight": 0.0, "magnitude_weight": 0.0}, id="both_zero"),
        pytest.param({"force_target": -0.1}, id="negative_target"),
    ])
    def test_rejects_bad_config(self, kwargs):
        with pytest.raises(ValueError):
            LossConfig(**kwargs)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

class TestTrapObjective:
    def test_matches_total_loss(self, prototype_array, robot, trap_grid):
        cfg = LossConfig(1.0, 1.0, 0.05)
        objective = TrapObjective(prototype_array, trap_grid, robot, cfg)
        terms = objective.evaluate(np.radians(prototype_array.angles))
        assert terms.total == pytest.approx(total_loss(prototype_array, trap_grid, robot, cfg), rel=1e-10)
        assert terms.accuracy == pytest.approx(1.0 - terms.direction / 4.0)

    def test_prototype_trap_is_accurate(self, prototype_array, robot, trap_grid):
        objective = TrapObjective(prototype_array, trap_grid, robot, LossConfig())
        assert objective.evaluate(np.radians(prototype_array.angles)).accuracy > 0.75

    def test_with_config_shares_kernel(self, prototype_array, robot, trap_grid):
        objective = TrapObjective(prototype_array, trap_grid, robot, LossConfig())
        clone = objective.with_config(LossConfig(1.0, 1.0, 0.1))
        assert clone.kernel is objective.kernel
        assert clone.cfg.magnitude_weight == 1.0
        assert objective.cfg.magnitude_weight == 0.0
