"""CLI entrypoint for hamel-oc."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np
import scipy.linalg

from hamel_oc import verify
from hamel_oc.assembly import rhs_function
from hamel_oc.config import (
    FORMATS,
    ModelSection,
    ScenarioConfig,
    apply_overrides,
    load_config,
    parse_vector,
    resolve_scenario,
    shooting_config,
)
from hamel_oc.errors import (
    ConfigError,
    HamelError,
    NoConvergence,
    UnsupportedLayout,
)
from hamel_oc.models import MODEL_NAMES, BuiltinModel, Scenario, builtin
from hamel_oc.phase import Layout
from hamel_oc.problems import MechanicalSystem
from hamel_oc.solvers import (
    Trajectory,
    augmented_cost,
    evaluate_cost,
    initial_state,
    integrate,
    simulate,
    solve_with_restarts,
)
from hamel_oc.writers import (
    trajectory_frame,
    write_report_json,
    write_trajectory_csv,
    write_trajectory_json,
)

LOG_ENV = "HAMEL_OC_LOG"
LOG_LEVELS = {"off": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CHECKS_FAILED = 1


def _add_scenario_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by ``solve`` and ``simulate``."""
    parser.add_argument("--model", type=str, default=None, help="Built-in model.")
    parser.add_argument(
        "--scenario",
        type=str,
        default=None,
        help="Built-in scenario to start from (default: the model's first).",
    )
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="Scenario TOML file; flags override its values.",
    )
    for name in ("t0", "t1"):
        parser.add_argument(f"--{name}", type=float, default=None)
    for name, what in (
        ("q0", "initial configuration"),
        ("q1", "final configuration"),
        ("u0", "initial free quasi-velocities"),
        ("u1", "final free quasi-velocities"),
    ):
        parser.add_argument(
            f"--{name}",
            type=str,
            default=None,
            help=f"{what.capitalize()}, e.g. 0,pi/2,-pi/4.",
        )
    parser.add_argument("--steps", type=int, default=None, help="RK4 steps.")
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output file (default: <model>-<scenario>.<format>).",
    )
    parser.add_argument(
        "--format",
        choices=FORMATS,
        default=None,
        help="Output format (default: csv).",
    )


def _build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with its four subcommands."""
    parser = argparse.ArgumentParser(
        prog="hamel-oc",
        description="Boltzmann-Hamel mechanics and optimal control.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help=f"Enable verbose (DEBUG) logging; overrides {LOG_ENV}.",
    )

    subparsers = parser.add_subparsers(dest="command", required=True)

    # --- solve ---
    solve_parser = subparsers.add_parser(
        "solve",
        help="Solve an optimal control boundary value problem by shooting.",
    )
    _add_scenario_arguments(solve_parser)
    solve_parser.add_argument(
        "--layout",
        choices=("kinematic", "dynamic"),
        default=None,
        help="Optimal control layout (default: the scenario's).",
    )
    solve_parser.add_argument(
        "--tol", type=float, default=None, help="Newton tolerance."
    )
    solve_parser.add_argument(
        "--max-iters", type=int, default=None, help="Newton iteration limit."
    )
    solve_parser.add_argument(
        "--seed", type=int, default=None, help="Seed of the restart guesses."
    )
    solve_parser.add_argument(
        "--guess",
        type=str,
        default=None,
        help="Initial shooting unknowns, comma-separated.",
    )

    # --- simulate ---
    simulate_parser = subparsers.add_parser(
        "simulate",
        help="Integrate the forward Boltzmann-Hamel equations.",
    )
    _add_scenario_arguments(simulate_parser)
    simulate_parser.add_argument(
        "--forces",
        type=str,
        default=None,
        help="Constant free generalized forces (default: zero).",
    )

    # --- verify ---
    verify_parser = subparsers.add_parser(
        "verify",
        help="Check built-in models against their hand-written equations.",
    )
    verify_parser.add_argument(
        "--model",
        type=str,
        default=None,
        help="Verify a single model (default: all).",
    )
    verify_parser.add_argument(
        "--no-bvp",
        action="store_true",
        help="Skip solving the built-in boundary value problems.",
    )
    verify_parser.add_argument(
        "--seed", type=int, default=verify.DEFAULT_SEED, help="Sampling seed."
    )
    verify_parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Write the JSON report here (default: stdout).",
    )

    # --- list ---
    subparsers.add_parser("list", help="List the built-in models.")

    return parser


def _configure_logging(verbose: bool) -> None:
    """Pick the level from ``-v`` or :data:`LOG_ENV`; ``off`` keeps errors."""
    requested = os.environ.get(LOG_ENV, "info").strip().lower()
    level = logging.DEBUG if verbose else LOG_LEVELS.get(requested, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(levelname)s: %(message)s",
    )
    if requested not in LOG_LEVELS:
        logging.warning(
            "Unknown %s value '%s'; using info (valid: %s)",
            LOG_ENV,
            requested,
            ", ".join(LOG_LEVELS),
        )


def main(argv: list[str] | None = None) -> None:
    """CLI entrypoint.

    Exit status is 0 on success, 1 on usage, configuration or model errors and 2
    when shooting does not converge.

    Args:
        argv: Command-line arguments.  Defaults to ``sys.argv[1:]``.
    """
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    handlers = {
        "solve": _handle_solve,
        "simulate": _handle_simulate,
        "verify": _handle_verify,
        "list": _handle_list,
    }
    try:
        code = handlers[args.command](args)
    except NoConvergence as exc:
        logging.error("%s", exc)
        sys.exit(EXIT_NO_CONVERGENCE)
    except HamelError as exc:
        logging.error("%s", exc)
        sys.exit(EXIT_USAGE)
    if code != EXIT_OK:
        sys.exit(code)


def _resolve_config(
    args: argparse.Namespace, **extra: Any
) -> tuple[ScenarioConfig, BuiltinModel, Scenario]:
    """Load the config file (if any), apply flags, and resolve the scenario.

    Args:
        args: Parsed CLI namespace with the scenario flags.
        **extra: Further overrides, e.g. ``layout``.

    Returns:
        Tuple of (config, model, scenario).
    """
    if args.config:
        config = load_config(Path(args.config))
        if args.model:
            model = dataclasses.replace(config.model, name=args.model)
            config = dataclasses.replace(config, model=model)
    elif args.model:
        config = ScenarioConfig(model=ModelSection(name=args.model))
    else:
        raise ConfigError("model: pass --model or --config")

    config = apply_overrides(
        config,
        scenario=args.scenario,
        t0=args.t0,
        t1=args.t1,
        q0=args.q0,
        q1=args.q1,
        u0=args.u0,
        u1=args.u1,
        steps=args.steps,
        tol=getattr(args, "tol", None),
        max_iters=getattr(args, "max_iters", None),
        seed=getattr(args, "seed", None),
        guess=getattr(args, "guess", None),
        out=args.out,
        format=args.format,
        **extra,
    )
    model, scenario = resolve_scenario(config)
    return config, model, scenario


def _output_path(
    config: ScenarioConfig, model: BuiltinModel, scenario: Scenario
) -> Path:
    if config.output.path:
        return Path(config.output.path)
    return Path(f"{model.name}-{scenario.name}.{config.output.format}")


def _write(
    path: Path,
    fmt: str,
    trajectory: Trajectory,
    problem: Any,
    model: BuiltinModel,
    meta: dict[str, Any],
    diagnostics: dict[str, Any],
    forces: np.ndarray | None = None,
) -> None:
    frame = trajectory_frame(trajectory, problem, model, forces)
    if fmt == "json":
        write_trajectory_json(path, frame, meta, diagnostics)
    else:
        write_trajectory_csv(path, frame, meta)
    logging.info("Saved %s", path)


def _meta(
    model: BuiltinModel, scenario: Scenario, trajectory: Trajectory, **values: Any
) -> dict[str, Any]:
    return {
        "model": model.name,
        "scenario": scenario.name,
        "layout": trajectory.layout.value,
        "n": trajectory.n,
        "m": trajectory.m,
        **values,
    }


def _best_effort(
    problem: Any, scenario: Scenario, unknowns: np.ndarray, steps: int
) -> Trajectory | None:
    """Integrate from the best unknowns of a failed solve, if that works."""
    bc = scenario.bc
    try:
        start = initial_state(problem, bc, unknowns)
        return integrate(rhs_function(problem), start, bc.t0, bc.t1, steps)
    except (
        HamelError,
        ValueError,
        FloatingPointError,
        scipy.linalg.LinAlgError,
    ) as exc:
        logging.warning("No trajectory written for the failed solve: %s", exc)
        return None


def _handle_solve(args: argparse.Namespace) -> int:
    """Handle the ``solve`` subcommand."""
    config, model, scenario = _resolve_config(args, layout=args.layout)
    if scenario.layout is Layout.MECHANICS:
        raise UnsupportedLayout(
            f"scenario '{scenario.name}' is a mechanics scenario; use simulate"
        )
    problem = model.problem(scenario.layout)
    settings = shooting_config(config, scenario)
    path = _output_path(config, model, scenario)
    fmt = config.output.format

    try:
        result = solve_with_restarts(problem, scenario.bc, settings, scenario.guess)
    except NoConvergence as exc:
        logging.error("%s", exc)
        trajectory = _best_effort(problem, scenario, exc.unknowns, settings.steps)
        if trajectory is not None:
            meta = _meta(
                model,
                scenario,
                trajectory,
                converged=False,
                residual=exc.residual,
                iterations=exc.iterations,
            )
            _write(path, fmt, trajectory, problem, model, meta, {"reason": exc.reason})
        print("converged: false")
        print(f"unknowns: {np.array2string(exc.unknowns, precision=12)}")
        print(f"residual: {exc.residual:.3e}")
        return EXIT_NO_CONVERGENCE

    trajectory = result.trajectory
    cost = evaluate_cost(problem, trajectory)
    meta = _meta(
        model,
        scenario,
        trajectory,
        converged=True,
        residual=result.residual,
        cost=cost,
        iterations=result.iterations,
    )
    diagnostics = {
        "unknowns": result.unknowns,
        "singular_values": result.singular_values,
        "degenerate_directions": result.degenerate_directions,
        "augmented_cost": augmented_cost(problem, trajectory),
    }
    _write(path, fmt, trajectory, problem, model, meta, diagnostics)

    print("converged: true")
    print(f"unknowns: {np.array2string(result.unknowns, precision=12)}")
    print(f"residual: {result.residual:.3e}")
    print(f"cost: {cost!r}")
    print(f"iterations: {result.iterations}")
    print(f"output: {path}")
    return EXIT_OK


def _handle_simulate(args: argparse.Namespace) -> int:
    """Handle the ``simulate`` subcommand."""
    config, model, scenario = _resolve_config(args, layout="mechanics")
    system = model.problem(Layout.MECHANICS)
    assert isinstance(system, MechanicalSystem)
    forces = None
    if args.forces is not None:
        forces = parse_vector(args.forces, "--forces")
        if forces.shape != (system.frame.k,):
            raise ConfigError(
                f"--forces: length {forces.size}, expected {system.frame.k}"
            )
    bc = scenario.bc
    steps = shooting_config(config, scenario).steps
    trajectory = simulate(system, forces, bc.q0, bc.u0_free, bc.t0, bc.t1, steps)
    path = _output_path(config, model, scenario)
    meta = _meta(model, scenario, trajectory, steps=steps)
    _write(path, config.output.format, trajectory, system, model, meta, {}, forces)

    final = trajectory.final
    print(f"q(t1): {np.array2string(final.q, precision=12)}")
    print(f"u(t1): {np.array2string(final.u, precision=12)}")
    print(f"output: {path}")
    return EXIT_OK


def _handle_verify(args: argparse.Namespace) -> int:
    """Handle the ``verify`` subcommand."""
    names = [args.model] if args.model else list(MODEL_NAMES)
    reports = []
    for name in names:
        model = builtin(name)
        logging.info("Verifying %s with seed %#x", name, args.seed)
        reports.append(verify.verify_model(model, seed=args.seed, bvp=not args.no_bvp))
    summary = verify.summarize(reports)
    write_report_json(Path(args.out) if args.out else None, summary)
    for report in reports:
        failed = [check.name for check in report.checks if not check.passed]
        if failed:
            logging.error("%s failed: %s", report.subject, ", ".join(failed))
    return EXIT_OK if summary["passed"] else EXIT_CHECKS_FAILED


def _handle_list(args: argparse.Namespace) -> int:
    """Handle the ``list`` subcommand."""
    for name in MODEL_NAMES:
        model = builtin(name)
        frame = model.frame
        layouts = ", ".join(layout.value for layout in model.layouts)
        print(f"{name}: n={frame.n} m={frame.m} layouts={layouts}")
        print(f"  {model.description}")
        for scenario in model.scenarios.values():
            layout = scenario.layout.value
            print(f"  - {scenario.name} ({layout}): {scenario.description}")
        for alias, target in model.aliases.items():
            print(f"  - {alias}: alias of {target}")
    return EXIT_OK
