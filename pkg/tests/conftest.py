"""Shared pytest fixtures for magnet-array trap tests."""

import pytest

from magtrap import RunConfig, build_array, build_grid

MM = 1e-3


@pytest.fixture
def prototype_config():
    """The two-magnet prototype: 2-inch N40 cubes 120 mm apart, trap at 89 mm."""
    return RunConfig(pitch_mm=120.0)


@pytest.fixture
def prototype_array():
    """Two 50.8 mm cubes at z = ±60 mm rotated to the known 341°/19° solution."""
    return build_array(2, 50.8 * MM, 1.275, pitch_override=120.0 * MM).with_angles([341.0, 19.0])


@pytest.fixture
def robot():
    """N45 cylinder, 1 mm diameter by 2 mm long."""
    return RunConfig().robot()


@pytest.fixture
def trap_grid():
    """Default 20x20 grid over a 20 mm square centred 89 mm from the array."""
    return build_grid(89.0 * MM, 10.0 * MM, 20, 20)


@pytest.fixture
def small_grid():
    """A coarse 6x6 grid around the same trap, for quick optimiser runs."""
    return build_grid(89.0 * MM, 10.0 * MM, 6, 6)
