"""CSV and JSON writers; every artefact starts with the resolved config."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Sequence
from datetime import datetime, timezone
from typing import Any, TextIO

import numpy as np

from .analysis import SweepRow, TrapAnalysis
from .models import FieldDump, ForceField, OptimizationReport
from .optimizer import GradientCheck, LossSurface

FIELD_COLUMNS = ["x_mm", "y_mm", "z_mm", "Fx_N", "Fy_N", "Fz_N", "Bx_T", "By_T", "Bz_T"]


def _jsonify(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return _jsonify(value.item())
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


def write_json(stream: TextIO, payload: dict[str, Any], config: dict[str, Any]) -> None:
    """Write ``payload`` with the config echo and a creation timestamp.

    The timestamp lives under ``timing`` with any other wall-clock data, so
    equal runs differ only inside that key.
    """
    document = {"config": config, **payload}
    timing = dict(document.pop("timing", {}))
    timing["created_at"] = datetime.now(timezone.utc).isoformat()
    document["timing"] = timing
    json.dump(_jsonify(document), stream, indent=2, sort_keys=False)
    stream.write("\n")


def _config_line(stream: TextIO, config: dict[str, Any]) -> None:
    stream.write("# config: " + json.dumps(_jsonify(config), sort_keys=True) + "\n")


def write_field_csv(stream: TextIO, field: ForceField | FieldDump, config: dict[str, Any]) -> None:
    """Write one row per grid point: position [mm], force [N], flux density [T], error."""
    _config_line(stream, config)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(FIELD_COLUMNS + ["error"])
    points = field.grid.points * 1e3
    flux = field.flux if field.flux is not None else np.full_like(field.forces, np.nan)
    errors: Sequence[str] = field.errors if isinstance(field, FieldDump) else [""] * len(points)
    for p, f, b, err in zip(points, field.forces, flux, errors):
        writer.writerow([*(repr(float(v)) for v in (*p, *f, *b)), err])


def sweep_columns(rows: Sequence[SweepRow]) -> list[str]:
    """Column names for a sweep table, with angle columns for the largest count."""
    widest = max((r.magnets for r in rows), default=0)
    return (
        ["distance_mm", "n_magnets", "branch"]
        + [f"alpha_{k}_deg" for k in range(1, widest + 1)]
        + ["loss", "accuracy", "avg_force_N", "aspect_ratio", "aspect_ratio_smoothed", "truncated_flag"]
        + ["seconds", "error"]
    )


def write_sweep_csv(stream: TextIO, rows: Sequence[SweepRow], config: dict[str, Any]) -> None:
    """Write the sweep table; missing angles and failed metrics are blank or NaN."""
    _config_line(stream, config)
    columns = sweep_columns(rows)
    widest = len(columns) - 11
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        angles = [repr(a) for a in row.angles] + [""] * (widest - len(row.angles))
        writer.writerow([
            repr(row.distance_mm), row.magnets, row.branch, *angles, repr(row.loss), repr(row.accuracy),
            repr(row.avg_force), repr(row.aspect_ratio), repr(row.aspect_ratio_smoothed), int(row.truncated),
            f"{row.seconds:.3f}", row.error,
        ])


def write_surface_csv(stream: TextIO, surface: LossSurface, config: dict[str, Any]) -> None:
    """Write the oracle surface as (alpha_1_deg, alpha_2_deg, loss) rows."""
    _config_line(stream, config)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["alpha_1_deg", "alpha_2_deg", "loss"])
    for a, first in enumerate(surface.axis):
        for b, second in enumerate(surface.axis):
            writer.writerow([repr(float(first)), repr(float(second)), repr(float(surface.surface[a, b]))])


def report_payload(report: OptimizationReport, force_target: float | None = None) -> dict[str, Any]:
    """JSON payload of an optimisation report."""
    payload = report.to_dict()
    if force_target is not None:
        payload["tuned_force_target_N"] = force_target
    return payload


def analysis_payload(analysis: TrapAnalysis) -> dict[str, Any]:
    """JSON payload of single-trap metrics, lengths in mm."""
    aspect = analysis.aspect
    return {
        "center_mm": [c * 1e3 for c in analysis.center],
        "center_offset_mm": analysis.center_offset * 1e3,
        "avg_force_N": analysis.avg_force,
        "aspect_ratio": aspect.ratio if aspect else None,
        "extent_x_mm": aspect.extent_x * 1e3 if aspect else None,
        "extent_y_mm": aspect.extent_y * 1e3 if aspect else None,
        "truncated": aspect.truncated if aspect else None,
        "bz_zero_crossing_mm": analysis.bz_crossing * 1e3 if analysis.bz_crossing is not None else None,
        "accuracy": analysis.accuracy,
    }


def gradcheck_payload(result: GradientCheck, tolerance: float) -> dict[str, Any]:
    """JSON payload of a gradient check."""
    return {
        "max_relative_error": result.max_relative_error,
        "tolerance": tolerance,
        "passed": result.passed(tolerance),
        "trials": result.trials,
        "components_compared": result.compared,
        "worst_angles_deg": list(result.worst_angles),
    }
