"""TOML scenario configuration and command-line overrides.

A scenario file looks like::

    [model]
    name = "sphere_dyn"
    scenario = "fig2"

    [model.params]
    inertia = 2.0

    [bc]
    t1 = 2.0
    q1 = ["pi", "-pi/4", "pi/5"]

    [solver]
    steps = 400
    newton_tol = 1e-9

    [output]
    path = "out/sphere.csv"
    format = "csv"

Every table except ``[model]`` is optional; missing values come from the named
built-in scenario.
"""

from __future__ import annotations

import dataclasses
import logging
import re
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from hamel_oc.errors import ConfigError
from hamel_oc.models import BuiltinModel, Scenario, builtin
from hamel_oc.phase import Layout
from hamel_oc.problems import BoundaryConditions
from hamel_oc.solvers import ShootingConfig, unknown_count

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Vector = tuple[float, ...]

FORMATS = ("csv", "json")
LAYOUT_NAMES: dict[str, Layout] = {
    "kinematic": Layout.KINEMATIC,
    "dynamic": Layout.DYNAMIC,
    "mechanics": Layout.MECHANICS,
} | {layout.value: layout for layout in Layout}


@dataclass(frozen=True)
class ModelSection:
    """``[model]``: which built-in to use and its parameter overrides."""

    name: str
    scenario: str | None = None
    params: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class BcSection:
    """``[bc]``: boundary data replacing the base scenario's values."""

    t0: float | None = None
    t1: float | None = None
    q0: Vector | None = None
    q1: Vector | None = None
    u0: Vector | None = None
    u1: Vector | None = None


@dataclass(frozen=True)
class SolverSection:
    """``[solver]``: shooting settings; unset values keep the defaults."""

    steps: int | None = None
    newton_tol: float | None = None
    max_iters: int | None = None
    fd_step: float | None = None
    restarts: int | None = None
    seed: int | None = None
    workers: int | None = None
    guess: Vector | None = None


@dataclass(frozen=True)
class OutputSection:
    """``[output]``: where and how to write the trajectory."""

    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one scenario."""

    model: ModelSection
    layout: str | None = None
    bc: BcSection = field(default_factory=BcSection)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)


# ---------------------------------------------------------------------------
# Scalars and vectors
# ---------------------------------------------------------------------------

_OPERATOR = re.compile(r"\s*([*/])\s*")


def parse_scalar(text: str, field_name: str) -> float:
    """Parse a number, optionally written with ``pi`` products and quotients.

    Accepts e.g. ``1.5``, ``pi``, ``-pi/4``, ``2*pi/5``.

    Raises:
        ConfigError: Naming *field_name* when *text* is malformed.
    """
    body = text.strip()
    sign = 1.0
    if body[:1] in "+-" and body:
        sign = -1.0 if body[0] == "-" else 1.0
        body = body[1:].strip()
    parts = _OPERATOR.split(body)
    value = 1.0
    operator = "*"
    for index, part in enumerate(parts):
        if index % 2:
            operator = part
            continue
        if part.lower() == "pi":
            factor = float(np.pi)
        else:
            try:
                factor = float(part)
            except ValueError:
                raise ConfigError(
                    f"{field_name}: cannot parse '{text}' as a number"
                ) from None
        if operator == "*":
            value *= factor
        elif factor == 0:
            raise ConfigError(f"{field_name}: division by zero in '{text}'")
        else:
            value /= factor
    if not np.isfinite(value):
        raise ConfigError(f"{field_name}: '{text}' is not finite")
    return sign * value


def parse_vector(text: str, field_name: str) -> FloatArray:
    """Parse a comma-separated vector such as ``pi,-pi/4,pi/5``.

    Raises:
        ConfigError: Naming *field_name* when any entry is malformed.
    """
    if not text.strip():
        raise ConfigError(f"{field_name}: empty vector")
    return np.array([parse_scalar(item, field_name) for item in text.split(",")])


def _scalar(raw: Any, field_name: str) -> float:
    if isinstance(raw, bool):
        raise ConfigError(f"{field_name}: expected a number, got {raw!r}")
    if isinstance(raw, int | float):
        return float(raw)
    if isinstance(raw, str):
        return parse_scalar(raw, field_name)
    raise ConfigError(f"{field_name}: expected a number, got {raw!r}")


def _vector(raw: Any, field_name: str) -> Vector:
    if isinstance(raw, str):
        return tuple(float(v) for v in parse_vector(raw, field_name))
    if not isinstance(raw, list):
        raise ConfigError(f"{field_name}: expected a list of numbers")
    return tuple(_scalar(item, field_name) for item in raw)


def _integer(raw: Any, field_name: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{field_name}: expected an integer, got {raw!r}")
    return raw


def _table(raw: dict[str, Any], key: str) -> dict[str, Any]:
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected a table")
    return value


def _reject_unknown(table: dict[str, Any], prefix: str, known: set[str]) -> None:
    extra = sorted(set(table) - known)
    if extra:
        raise ConfigError(f"{prefix}.{extra[0]}: unknown key")


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def load_config(path: Path) -> ScenarioConfig:
    """Read and parse a scenario TOML file.

    Args:
        path: Path to the TOML file.

    Returns:
        Parsed ``ScenarioConfig``.

    Raises:
        ConfigError: If the file is missing, is not valid TOML, or a field
            is missing or malformed.  The message names the field.
    """
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    _reject_unknown(raw, "config", {"model", "layout", "bc", "solver", "output"})
    model_raw = _table(raw, "model")
    if "name" not in model_raw:
        raise ConfigError("model.name: required")
    _reject_unknown(model_raw, "model", {"name", "scenario", "params"})
    params = {
        key: _scalar(value, f"model.params.{key}")
        for key, value in _table(model_raw, "params").items()
    }
    model = ModelSection(
        name=str(model_raw["name"]),
        scenario=model_raw.get("scenario"),
        params=params,
    )

    bc_raw = _table(raw, "bc")
    _reject_unknown(bc_raw, "bc", {"t0", "t1", "q0", "q1", "u0", "u1"})
    bc = BcSection(
        **{
            key: (_scalar if key in ("t0", "t1") else _vector)(value, f"bc.{key}")
            for key, value in bc_raw.items()
        }
    )

    solver_raw = _table(raw, "solver")
    solver_fields = {f.name for f in dataclasses.fields(SolverSection)}
    _reject_unknown(solver_raw, "solver", solver_fields)
    solver_values: dict[str, Any] = {}
    for key, value in solver_raw.items():
        name = f"solver.{key}"
        if key in ("steps", "max_iters", "restarts", "seed", "workers"):
            solver_values[key] = _integer(value, name)
        elif key == "guess":
            solver_values[key] = _vector(value, name)
        else:
            solver_values[key] = _scalar(value, name)

    output_raw = _table(raw, "output")
    _reject_unknown(output_raw, "output", {"path", "format"})
    output = OutputSection(
        path=output_raw.get("path"),
        format=output_raw.get("format", "csv"),
    )
    if output.format not in FORMATS:
        raise ConfigError(f"output.format: expected one of {', '.join(FORMATS)}")

    layout = raw.get("layout")
    if layout is not None and layout not in LAYOUT_NAMES:
        raise ConfigError(
            f"layout: expected one of kinematic, dynamic, mechanics; got {layout!r}"
        )
    logger.debug("Loaded config %s for model %s", path, model.name)
    return ScenarioConfig(
        model=model,
        layout=layout,
        bc=bc,
        solver=SolverSection(**solver_values),
        output=output,
    )


def apply_overrides(config: ScenarioConfig, **flags: Any) -> ScenarioConfig:
    """Return *config* with command-line values replacing file values.

    Recognised flags: ``scenario``, ``layout``, ``t0``, ``t1``, ``q0``, ``q1``,
    ``u0``, ``u1`` (vectors as text), ``steps``, ``tol``, ``max_iters``,
    ``seed``, ``guess``, ``out``, ``format``.  ``None`` leaves a value alone.

    Raises:
        ConfigError: If a vector flag is malformed.
    """
    given = {key: value for key, value in flags.items() if value is not None}
    model = config.model
    if "scenario" in given:
        model = dataclasses.replace(model, scenario=given["scenario"])

    bc_values: dict[str, Any] = {}
    for key in ("t0", "t1"):
        if key in given:
            bc_values[key] = float(given[key])
    for key in ("q0", "q1", "u0", "u1"):
        if key in given:
            bc_values[key] = tuple(parse_vector(given[key], f"--{key}"))

    solver_values: dict[str, Any] = {}
    for flag, key in (
        ("steps", "steps"),
        ("tol", "newton_tol"),
        ("max_iters", "max_iters"),
        ("seed", "seed"),
    ):
        if flag in given:
            solver_values[key] = given[flag]
    if "guess" in given:
        solver_values["guess"] = tuple(parse_vector(given["guess"], "--guess"))

    output_values: dict[str, Any] = {}
    if "out" in given:
        output_values["path"] = str(given["out"])
    if "format" in given:
        output_values["format"] = given["format"]

    return dataclasses.replace(
        config,
        model=model,
        layout=given.get("layout", config.layout),
        bc=dataclasses.replace(config.bc, **bc_values),
        solver=dataclasses.replace(config.solver, **solver_values),
        output=dataclasses.replace(config.output, **output_values),
    )


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


def _pick_base(
    model: BuiltinModel, name: str | None, layout: Layout | None
) -> Scenario | None:
    if name is not None:
        return model.scenario(name)
    for scenario in model.scenarios.values():
        if layout is None or scenario.layout is layout:
            return scenario
    return None


def _sized(
    value: Vector | None, base: FloatArray | None, field_name: str, size: int
) -> FloatArray | None:
    chosen = np.array(value, dtype=float) if value is not None else base
    if chosen is not None and chosen.shape != (size,):
        raise ConfigError(f"{field_name}: length {chosen.size}, expected {size}")
    return chosen


def resolve_scenario(config: ScenarioConfig) -> tuple[BuiltinModel, Scenario]:
    """Turn a configuration into a built-in model and a complete scenario.

    Starts from the named built-in scenario (or the model's first scenario of
    the requested layout) and replaces whatever the configuration sets.

    Raises:
        UnknownModel: If the model name is not registered.
        UnsupportedLayout: If the model lacks the requested layout.
        ConfigError: If a value is missing or has the wrong length.
    """
    model = builtin(config.model.name, **config.model.params)
    layout = LAYOUT_NAMES[config.layout] if config.layout else None
    base = _pick_base(model, config.model.scenario, layout)
    if layout is None:
        layout = base.layout if base is not None else model.layouts[0]
    model.problem(layout)

    frame = model.frame
    bc_cfg = config.bc
    old = base.bc if base is not None else None
    t0 = bc_cfg.t0 if bc_cfg.t0 is not None else (old.t0 if old else 0.0)
    t1 = bc_cfg.t1 if bc_cfg.t1 is not None else (old.t1 if old else 1.0)
    if not t1 > t0:
        raise ConfigError(f"bc.t1: must exceed bc.t0 ({t0}), got {t1}")
    q0 = _sized(bc_cfg.q0, old.q0 if old else None, "bc.q0", frame.n)
    q1 = _sized(bc_cfg.q1, old.q1 if old else None, "bc.q1", frame.n)
    u0 = _sized(bc_cfg.u0, old.u0_free if old else None, "bc.u0", frame.k)
    u1 = _sized(bc_cfg.u1, old.u1_free if old else None, "bc.u1", frame.k)
    if q0 is None:
        raise ConfigError("bc.q0: required")
    if layout is Layout.KINEMATIC:
        u0 = u1 = None
    if layout is not Layout.MECHANICS and q1 is None:
        raise ConfigError("bc.q1: required")
    if layout is not Layout.KINEMATIC and u0 is None:
        u0 = np.zeros(frame.k)
    if layout is Layout.DYNAMIC and u1 is None:
        u1 = np.zeros(frame.k)
    if layout is Layout.MECHANICS:
        q1 = q0 if q1 is None else q1
        u1 = None

    bc = BoundaryConditions(t0=t0, t1=t1, q0=q0, q1=q1, u0_free=u0, u1_free=u1)
    guess = None
    if config.solver.guess is not None:
        guess = np.array(config.solver.guess, dtype=float)
    elif base is not None and base.layout is layout:
        guess = base.guess
    if guess is not None and layout is not Layout.MECHANICS:
        expected = unknown_count(model.problem(layout))
        if guess.shape != (expected,):
            raise ConfigError(f"solver.guess: length {guess.size}, expected {expected}")

    scenario = Scenario(
        name=base.name if base is not None else "custom",
        layout=layout,
        bc=bc,
        guess=guess,
        steps=config.solver.steps or (base.steps if base is not None else None),
        description=base.description if base is not None else "",
    )
    logger.info(
        "Resolved %s scenario '%s' (%s layout)", model.name, scenario.name, layout.value
    )
    return model, scenario


def shooting_config(config: ScenarioConfig, scenario: Scenario) -> ShootingConfig:
    """Solver settings: defaults, then the scenario's steps, then the file."""
    solver = config.solver
    values: dict[str, Any] = {
        key: getattr(solver, key)
        for key in ("newton_tol", "max_iters", "fd_step", "restarts", "seed", "workers")
        if getattr(solver, key) is not None
    }
    if scenario.steps is not None:
        values["steps"] = scenario.steps
    try:
        return ShootingConfig(**values)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
