"""Run configuration in human units, with file loading and flag overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .geometry import build_array, build_grid
from .models import AdamState, EvaluationGrid, LossConfig, MagnetArray, RestartPolicy, RobotMagnet

MM = 1e-3
MM3 = 1e-9

# Cylindrical robot magnet, 1 mm diameter x 2 mm.
DEFAULT_ROBOT_VOLUME_MM3 = math.pi * 0.5**2 * 2.0


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a run, in mm, degrees, tesla, and mm³.

    Defaults describe the two-magnet prototype: a 20 x 20 grid over a 20 mm square
    around a trap 89 mm from the array, Adam at η = 0.05 with β = (0.9, 0.999),
    five starts of 300 steps, a 0.9 accuracy threshold lowered by 0.1 for up
    to three rounds, and γ = 1.5.
    """
    magnets: int = 2
    edge_length_mm: float = 50.8
    remanence_t: float = 1.275
    extra_spacing_mm: float = 0.0
    pitch_mm: float | None = None
    trap_distance_mm: float = 89.0
    grid_columns: int = 20
    grid_rows: int = 20
    half_width_mm: float = 10.0
    robot_remanence_t: float = 1.32
    robot_volume_mm3: float = DEFAULT_ROBOT_VOLUME_MM3
    lambda1: float = 1.0
    lambda2: float = 1.0
    gamma: float = 1.5
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    starts: int = 5
    steps: int = 300
    accuracy_threshold: float = 0.9
    threshold_decrement: float = 0.1
    rounds: int = 3
    seed: int = 0
    threads: int = 1
    avg_radius_mm: float = 10.0
    force_threshold_mn: float = 0.1
    fine_resolution: int = 81
    smoothing_window: int = 5

    def __post_init__(self) -> None:
        """Coerce numeric types and reject impossible values.

        Raises:
            ConfigError: Naming the first offending key.
        """
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            kind = int if f.type in ("int", int) else float
            try:
                coerced = kind(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f.name, f"expected {kind.__name__}, got {value!r}") from exc
            if kind is int and isinstance(value, float) and not value.is_integer():
                raise ConfigError(f.name, f"expected an integer, got {value!r}")
            if kind is float and not math.isfinite(coerced):
                raise ConfigError(f.name, "must be finite")
            object.__setattr__(self, f.name, coerced)
        positive = (
            "magnets", "edge_length_mm", "remanence_t", "trap_distance_mm", "grid_columns", "grid_rows",
            "half_width_mm", "robot_remanence_t", "robot_volume_mm3", "gamma", "learning_rate", "starts",
            "steps", "rounds", "threads", "avg_radius_mm", "force_threshold_mn", "fine_resolution",
            "smoothing_window",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(name, f"must be positive, got {getattr(self, name)}")
        for name in ("lambda1", "lambda2", "threshold_decrement", "extra_spacing_mm"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be non-negative, got {getattr(self, name)}")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ConfigError("lambda1", "lambda1 and lambda2 cannot both be zero")
        if self.magnets % 2:
            raise ConfigError("magnets", f"must be even, got {self.magnets}")
        if not 0.0 < self.accuracy_threshold <= 1.0:
            raise ConfigError("accuracy_threshold", "must lie in (0, 1]")

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> RunConfig:
        """Build a config from a flat mapping; missing keys keep their defaults.

        Raises:
            ConfigError: If a key is unknown.
        """
        known = {f.name for f in fields(cls)}
        for key in values:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        """Load a flat JSON object of config keys.

        Raises:
            ConfigError: If the file is not a flat JSON object or holds an unknown key.
        """
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(str(path), f"cannot read config: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(str(path), "config file must hold a JSON object")
        for key, value in values.items():
            if isinstance(value, (dict, list)):
                raise ConfigError(key, "config values must be scalars")
        return cls.from_mapping(values)

    def with_overrides(self, **overrides: Any) -> RunConfig:
        """Apply overrides whose value is not None."""
        applied = {k: v for k, v in overrides.items() if v is not None}
        known = {f.name for f in fields(self)}
        for key in applied:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        return replace(self, **applied)

    def to_dict(self) -> dict[str, Any]:
        """Fully resolved values, for embedding in outputs."""
        return asdict(self)

    # -- SI builders ---------------------------------------------------------

    def build_array(self, magnets: int | None = None) -> MagnetArray:
        """Magnet array in SI units, all angles zero."""
        pitch = self.pitch_mm * MM if self.pitch_mm is not None else None
        return build_array(
            magnets or self.magnets, self.edge_length_mm * MM, self.remanence_t, self.extra_spacing_mm * MM, pitch
        )

    def build_grid(self, trap_distance_mm: float | None = None) -> EvaluationGrid:
        """Trap-centred evaluation grid in SI units."""
        distance = trap_distance_mm if trap_distance_mm is not None else self.trap_distance_mm
        return build_grid(distance * MM, self.half_width_mm * MM, self.grid_columns, self.grid_rows)

    def robot(self) -> RobotMagnet:
        """Trapped magnet in SI units."""
        return RobotMagnet(self.robot_remanence_t, self.robot_volume_mm3 * MM3)

    def loss_config(self, force_target: float = 0.0) -> LossConfig:
        """Loss weights with the given Ŷ [N]."""
        return LossConfig(self.lambda1, self.lambda2, force_target)

    def adam_state(self) -> AdamState:
        """Adam hyperparameters."""
        return AdamState(self.learning_rate, self.beta1, self.beta2, self.adam_epsilon)

    def restart_policy(self) -> RestartPolicy:
        """Multi-start protocol."""
        return RestartPolicy(
            self.starts, self.steps, self.accuracy_threshold, self.threshold_decrement, self.rounds, self.seed,
            self.threads,
        )
