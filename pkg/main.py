"""Demo script: evaluates the two-magnet prototype trap and re-optimises it."""

import numpy as np

from magtrap import RunConfig, evaluate_grid, multi_restart
from magtrap.analysis import analyze_trap
from magtrap.objective import accuracy, build_target, normalize_output


def section(title: str) -> None:
    print(f"\n{'=' * 60}")
    print(f"  {title}")
    print('=' * 60)


def show_field(label: str, config: RunConfig, angles: list[float]) -> None:
    array = config.build_array().with_angles(angles)
    grid = config.build_grid()
    field = evaluate_grid(array, grid, config.robot())
    output, flags = normalize_output(field)
    print(f"\n{label}")
    print(f"  Angles     : {', '.join(f'{a:.1f}' for a in array.angles)} deg")
    print(f"  Accuracy   : {accuracy(output, build_target(grid), flags):.4f}")
    print(f"  Force sum  : {field.total_magnitude():.4e} N")
    print(f"  Peak |F|   : {np.max(field.magnitudes()):.4e} N")


def main() -> None:
    # Prototype: two 2-inch N40 cubes 120 mm apart, trap 89 mm out.
    config = RunConfig(pitch_mm=120.0, lambda2=0.0, steps=150, starts=3)

    # ------------------------------------------------------------------ #
    # Field evaluation                                                     #
    # ------------------------------------------------------------------ #
    section("FIELD")

    show_field("Prototype angles", config, [341.0, 19.0])
    show_field("Both moments along +Z", config, [0.0, 0.0])
    show_field("Mirrored prototype", config, [19.0, 341.0])

    # ------------------------------------------------------------------ #
    # Optimisation                                                         #
    # ------------------------------------------------------------------ #
    section("OPTIMISATION (direction only)")

    report = multi_restart(
        config.build_grid(), config.robot(), config.build_array(), config.loss_config(),
        config.restart_policy(), config.adam_state(),
    )
    print(f"\n  Angles     : {', '.join(f'{a:.2f}' for a in report.angles)} deg")
    print(f"  Accuracy   : {report.accuracy:.4f}")
    print(f"  Restarts   : {report.restarts_executed} in {report.rounds_executed} round(s)")

    # ------------------------------------------------------------------ #
    # Trap metrics                                                         #
    # ------------------------------------------------------------------ #
    section("TRAP METRICS")

    analysis = analyze_trap(config, report.angles)
    print(f"\n  Centre     : ({analysis.center[0] * 1e3:.2f}, {analysis.center[1] * 1e3:.2f}) mm")
    print(f"  Avg |F|    : {analysis.avg_force:.4e} N within {config.avg_radius_mm:.0f} mm")
    if analysis.aspect is not None:
        print(f"  Aspect     : {analysis.aspect.ratio:.2f}{' (truncated)' if analysis.aspect.truncated else ''}")
    if analysis.bz_crossing is not None:
        print(f"  B_z = 0 at : y = {analysis.bz_crossing * 1e3:.2f} mm")

    print()


if __name__ == "__main__":
    main()
