"""Command-line interface for magnet-array trap design."""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from collections.abc import Iterator
from pathlib import Path
from typing import TextIO

import numpy as np

from . import export
from .analysis import analyze_trap, distance_sweep, parse_distances
from .config import MM, RunConfig
from .dipole_field import evaluate_grid, evaluate_plane
from .enums import Plane
from .errors import MagtrapError, OptimizationFailedError
from .geometry import plane_grid
from .optimizer import brute_force_2mag, gradient_check, multi_restart, tune_force_target

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILED = 2

# flag dest -> RunConfig key
_CONFIG_FLAGS = {
    "magnets": ("--magnets", int, "even magnet count (default 2)"),
    "edge_length_mm": ("--edge-mm", float, "cube edge length in mm (default 50.8, 2-inch N40 cube)"),
    "remanence_t": ("--remanence", float, "array remanence in T (default 1.275, N40)"),
    "extra_spacing_mm": ("--spacing-mm", float, "extra gap s added to the face diagonal, mm (default 0)"),
    "pitch_mm": ("--pitch-mm", float, "explicit centre-to-centre pitch in mm; the prototype used 120"),
    "trap_distance_mm": ("--distance-mm", float, "trap distance y_trap in mm (default 89)"),
    "grid_columns": ("--columns", int, "grid points along X, i (default 20)"),
    "grid_rows": ("--rows", int, "grid points along Y, j (default 20)"),
    "half_width_mm": ("--half-width-mm", float, "half side of the trap area in mm (default 10, a 20 mm square)"),
    "robot_remanence_t": ("--robot-remanence", float, "robot remanence in T (default 1.32, N45)"),
    "robot_volume_mm3": ("--robot-volume-mm3", float, "robot volume in mm^3 (default: 1 mm x 2 mm cylinder)"),
    "lambda1": ("--lambda1", float, "direction loss weight (default 1)"),
    "lambda2": ("--lambda2", float, "magnitude loss weight; 0 runs a single direction-only stage (default 1)"),
    "gamma": ("--gamma", float, "stage-2 force target as a multiple of the stage-1 grid-total force (default 1.5)"),
    "learning_rate": ("--lr", float, "Adam learning rate in radians (default 0.05)"),
    "beta1": ("--beta1", float, "Adam beta1 (default 0.9)"),
    "beta2": ("--beta2", float, "Adam beta2 (default 0.999)"),
    "adam_epsilon": ("--adam-eps", float, "Adam epsilon (default 1e-8)"),
    "starts": ("--starts", int, "random starts per round, k (default 5)"),
    "steps": ("--steps", int, "Adam steps per start (default 300)"),
    "accuracy_threshold": ("--threshold", float, "accuracy that stops the search (default 0.9)"),
    "threshold_decrement": ("--decrement", float, "threshold drop after a failed round (default 0.1)"),
    "rounds": ("--rounds", int, "maximum rounds, c (default 3)"),
    "seed": ("--seed", int, "random seed (default 0)"),
    "threads": ("--threads", int, "concurrent restarts (default 1)"),
    "avg_radius_mm": ("--avg-radius-mm", float, "radius for the average force metric in mm (default 10)"),
    "force_threshold_mn": ("--force-threshold-mn", float, "low-force bound for the aspect ratio in mN (default 0.1)"),
    "fine_resolution": ("--fine-resolution", int, "samples per side of the aspect-ratio grid (default 81)"),
    "smoothing_window": ("--smoothing-window", int, "aspect-ratio moving-average window (default 5)"),
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON file of config keys; flags override it")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING"])
    for dest, (flag, kind, help_text) in _CONFIG_FLAGS.items():
        common.add_argument(flag, dest=dest, type=kind, default=None, help=help_text)
    return common


def _build_parser() -> argparse.ArgumentParser:
    """Build and return the argument parser for the CLI.

    Returns:
        A configured ArgumentParser with optimize, field, sweep, analyze,
        gradcheck, and oracle subcommands.
    """
    parser = argparse.ArgumentParser(
        prog="python -m magtrap",
        description="Design rotatable permanent-magnet arrays that form a 2D force trap.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Lengths are given in mm and angles in degrees; everything runs in SI units internally.
The magnitude target is a grid total, so changing --columns/--rows changes its meaning.

Examples:
  python -m magtrap optimize --pitch-mm 120 --out report.json
  python -m magtrap field --pitch-mm 120 --angles 341 19 --plane yz --out field.csv
  python -m magtrap sweep --distances 20:130:100 --counts 2,4,6,8 --out sweep.csv
  python -m magtrap gradcheck --trials 50 --magnets 4
  python -m magtrap oracle --pitch-mm 120 --resolution 1 --out surface.csv
        """,
    )
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    subparsers.required = True
    common = _common_parser()

    optimize = subparsers.add_parser("optimize", parents=[common], help="Optimise magnet angles for a trap")
    optimize.add_argument("--field-csv", type=Path, help="also write the optimised force field here")

    field = subparsers.add_parser("field", parents=[common], help="Dump force and flux density on a plane")
    field.add_argument("--angles", type=float, nargs="+", required=True, help="magnet angles in degrees")
    field.add_argument("--plane", choices=[p.value for p in Plane], default=Plane.XY.value)
    field.add_argument("--u-range", type=float, nargs=2, metavar=("MIN", "MAX"),
                       help="first in-plane axis range in mm (x for xy, y for yz)")
    field.add_argument("--v-range", type=float, nargs=2, metavar=("MIN", "MAX"),
                       help="second in-plane axis range in mm (y for xy, z for yz)")
    field.add_argument("--resolution", type=int, nargs=2, metavar=("COLS", "ROWS"))

    sweep = subparsers.add_parser("sweep", parents=[common], help="Optimise traps over distances and counts")
    sweep.add_argument("--distances", default="20:130:100", help="start:stop:count or comma list, mm")
    sweep.add_argument("--counts", default="2", help="comma list of magnet counts")

    analyze = subparsers.add_parser("analyze", parents=[common], help="Trap metrics for given angles")
    analyze.add_argument("--angles", type=float, nargs="+", required=True, help="magnet angles in degrees")

    gradcheck = subparsers.add_parser("gradcheck", parents=[common], help="Check the analytic gradient")
    gradcheck.add_argument("--trials", type=int, default=50)
    gradcheck.add_argument("--step-deg", type=float, default=1e-5)
    gradcheck.add_argument("--tolerance", type=float, default=1e-5)
    gradcheck.add_argument("--force-target", type=float, default=0.0, help="Y-hat in N for the magnitude term")

    oracle = subparsers.add_parser("oracle", parents=[common], help="Brute-force the two-magnet loss surface")
    oracle.add_argument("--resolution", type=float, default=1.0, help="lattice spacing in degrees")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    return base.with_overrides(**{dest: getattr(args, dest) for dest in _CONFIG_FLAGS})


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
        force=True,
    )


@contextlib.contextmanager
def _output(path: Path | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    with path.open("w", encoding="utf-8", newline="") as handle:
        yield handle


def _cmd_optimize(args: argparse.Namespace, config: RunConfig) -> int:
    array = config.build_array()
    grid = config.build_grid()
    robot = config.robot()
    if config.lambda2 == 0:
        report = multi_restart(
            grid, robot, array, config.loss_config(), config.restart_policy(), config.adam_state()
        )
        force_target = None
    else:
        force_target, report = tune_force_target(
            grid, robot, array, config.restart_policy(), config.gamma, config.adam_state(),
            direction_weight=config.lambda1, magnitude_weight=config.lambda2,
        )
    with _output(args.out) as stream:
        export.write_json(stream, export.report_payload(report, force_target), config.to_dict())
    if args.field_csv:
        field = evaluate_grid(array.with_angles(report.angles), grid, robot)
        with _output(args.field_csv) as stream:
            export.write_field_csv(stream, field, config.to_dict())
    if args.out:
        angles = ", ".join(f"{a:.2f}" for a in report.angles)
        print(f"  Angles   : {angles} deg")
        print(f"  Accuracy : {report.accuracy:.4f}")
        print(f"  Loss     : {report.loss:.6e}")
    return EXIT_OK


def _default_ranges(plane: Plane, config: RunConfig) -> tuple[tuple[float, float], tuple[float, float]]:
    if plane is Plane.XY:
        w = config.half_width_mm
        return (-w, w), (config.trap_distance_mm - w, config.trap_distance_mm + w)
    array = config.build_array()
    reach = (float(np.max(np.abs(array.centers[:, 2]))) + config.edge_length_mm * MM) / MM
    return (0.0, 2.0 * config.trap_distance_mm), (-reach, reach)


def _cmd_field(args: argparse.Namespace, config: RunConfig) -> int:
    array = config.build_array().with_angles(args.angles)
    robot = config.robot()
    plane = Plane(args.plane)
    if plane is Plane.XY and args.u_range is None and args.v_range is None and args.resolution is None:
        grid = config.build_grid()
    else:
        u_default, v_default = _default_ranges(plane, config)
        u_range = tuple(v * MM for v in (args.u_range or u_default))
        v_range = tuple(v * MM for v in (args.v_range or v_default))
        columns, rows = args.resolution or (config.grid_columns, config.grid_rows)
        grid = plane_grid(plane, (u_range[0], u_range[1]), (v_range[0], v_range[1]), columns, rows)
    dump = evaluate_plane(array, grid, robot)
    with _output(args.out) as stream:
        export.write_field_csv(stream, dump, config.to_dict())
    if dump.failed:
        logger.warning("%d of %d points written as error rows", dump.failed, len(grid))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    distances = parse_distances(args.distances)
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    rows = distance_sweep(config, distances, counts)
    with _output(args.out) as stream:
        export.write_sweep_csv(stream, rows, config.to_dict())
    points = [r for r in rows if r.branch == 0]
    failed = sum(1 for r in points if r.error)
    if failed:
        logger.warning("%d of %d sweep points failed", failed, len(points))
    print(f"  Sweep points : {len(points) - failed} solved, {failed} failed", file=sys.stderr)
    return EXIT_FAILED if failed == len(points) else EXIT_OK


def _cmd_analyze(args: argparse.Namespace, config: RunConfig) -> int:
    analysis = analyze_trap(config, args.angles)
    payload = {"angles_deg": list(args.angles), **export.analysis_payload(analysis)}
    with _output(args.out) as stream:
        export.write_json(stream, payload, config.to_dict())
    return EXIT_OK


def _cmd_gradcheck(args: argparse.Namespace, config: RunConfig) -> int:
    result = gradient_check(
        config.build_grid(), config.robot(), config.loss_config(args.force_target), config.build_array(),
        trials=args.trials, step=args.step_deg, seed=config.seed,
    )
    with _output(args.out) as stream:
        export.write_json(stream, export.gradcheck_payload(result, args.tolerance), config.to_dict())
    print(f"  Max relative error : {result.max_relative_error:.3e}", file=sys.stderr)
    return EXIT_OK if result.passed(args.tolerance) else EXIT_FAILED


def _cmd_oracle(args: argparse.Namespace, config: RunConfig) -> int:
    surface = brute_force_2mag(config.build_grid(), config.robot(), config.build_array(), args.resolution)
    with _output(args.out) as stream:
        export.write_surface_csv(stream, surface, config.to_dict())
    print(
        f"  Oracle minimum : {surface.best_loss:.6e} at "
        f"({surface.best_angles[0]:.1f}, {surface.best_angles[1]:.1f}) deg",
        file=sys.stderr,
    )
    return EXIT_OK


_COMMANDS = {
    "optimize": _cmd_optimize,
    "field": _cmd_field,
    "sweep": _cmd_sweep,
    "analyze": _cmd_analyze,
    "gradcheck": _cmd_gradcheck,
    "oracle": _cmd_oracle,
}


def run(argv: list[str] | None = None) -> int:
    """Parse arguments, run the requested command, and return an exit code.

    Accepts an optional argv list for testability; defaults to sys.argv[1:].

    Args:
        argv: Argument list to parse. Defaults to sys.argv when None.

    Returns:
        0 on success, 1 on invalid input or config, 2 when optimisation or a
        gradient check fails.
    """
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.log_level)
    try:
        config = _resolve_config(args)
        return _COMMANDS[args.command](args, config)
    except OptimizationFailedError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (MagtrapError, ValueError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:  # pragma: no cover
    """Entry point for the CLI."""
    sys.exit(run())
