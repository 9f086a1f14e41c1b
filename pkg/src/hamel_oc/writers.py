"""Write trajectories and verification reports to the local filesystem."""

from __future__ import annotations

import json
import sys
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl

from hamel_oc.assembly import Forces, recover_controls, rhs_function
from hamel_oc.models import BuiltinModel
from hamel_oc.phase import Layout, block_slices
from hamel_oc.problems import DynamicOCP, KinematicOCP, MechanicalSystem
from hamel_oc.solvers import Trajectory, rhs_samples

META_KEYS = (
    "converged",
    "model",
    "scenario",
    "layout",
    "n",
    "m",
    "residual",
    "cost",
    "iterations",
)


def _ensure_parent(path: Path) -> None:
    """Create parent directories if they do not exist."""
    path.parent.mkdir(parents=True, exist_ok=True)


def state_columns(layout: Layout, n: int, m: int, free: list[int]) -> list[str]:
    """Column names of the state blocks, indices 1-based.

    Args:
        layout: State layout.
        n: Configuration dimension.
        m: Number of constraints.
        free: 0-based free slots; the remaining slots are constrained.

    Returns:
        ``q1..qn`` followed by ``u``/``a``/``j`` columns named after the
        free slots and ``mu`` columns named after the constrained ones.
    """
    constrained = [i for i in range(n) if i not in free]
    names = [f"q{i + 1}" for i in range(n)]
    for block in block_slices(layout, n, m):
        if block == "q":
            continue
        slots = constrained if block == "mu" else free
        names += [f"{block}{i + 1}" for i in slots]
    return names


def trajectory_frame(
    trajectory: Trajectory,
    problem: KinematicOCP | DynamicOCP | MechanicalSystem,
    model: BuiltinModel | None = None,
    forces: Forces | None = None,
) -> pl.DataFrame:
    """Tabulate a trajectory, one row per grid point.

    When *model* carries a mechanical system, the control forces that realise
    the motion are appended as ``Q<I>`` columns.  Along a mechanics
    trajectory they reproduce the applied *forces*.

    Args:
        trajectory: Solved or simulated trajectory.
        problem: Problem whose right-hand side produced *trajectory*.
        model: Built-in model, if any.
        forces: Forces applied during a mechanics simulation.

    Returns:
        Polars DataFrame with columns ``t, q.., u.., a.., j.., mu.., Q..``.
    """
    frame = problem.frame
    free = [int(i) for i in frame.free_indices]
    names = state_columns(trajectory.layout, trajectory.n, trajectory.m, free)
    data: dict[str, Any] = {"t": trajectory.t}
    for column, name in enumerate(names):
        data[name] = trajectory.states[:, column]

    mechanical = model.mechanical if model is not None else None
    if mechanical is not None:
        rhs = rhs_function(problem, forces)
        derivatives = rhs_samples(rhs, trajectory)
        controls = np.array(
            [
                recover_controls(mechanical, trajectory.state(i), derivatives[i])
                for i in range(trajectory.t.size)
            ]
        )
        for column, slot in enumerate(free):
            data[f"Q{slot + 1}"] = controls[:, column]
    return pl.DataFrame(data)


def _meta_lines(meta: Mapping[str, Any]) -> str:
    ordered = [key for key in META_KEYS if key in meta]
    ordered += sorted(key for key in meta if key not in META_KEYS)
    return "".join(f"# {key}={_meta_value(meta[key])}\n" for key in ordered)


def _meta_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trajectory_csv(
    path: Path, frame: pl.DataFrame, meta: Mapping[str, Any]
) -> None:
    """Write a trajectory table as CSV behind ``# key=value`` header lines.

    Args:
        path: Target ``.csv`` file path.
        frame: Table from :func:`trajectory_frame`.
        meta: Run metadata, e.g. ``converged``, ``model``, ``cost``.
    """
    _ensure_parent(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(_meta_lines(meta))
        fh.write(frame.write_csv())


def write_trajectory_json(
    path: Path,
    frame: pl.DataFrame,
    meta: Mapping[str, Any],
    diagnostics: Mapping[str, Any] | None = None,
) -> None:
    """Write a trajectory table with metadata and solver diagnostics as JSON.

    Args:
        path: Target ``.json`` file path.
        frame: Table from :func:`trajectory_frame`.
        meta: Run metadata.
        diagnostics: Extra figures (singular values, augmented cost, ...).
    """
    _ensure_parent(path)
    payload = {
        "meta": dict(meta),
        "diagnostics": dict(diagnostics or {}),
        "columns": frame.columns,
        "data": frame.to_dict(as_series=False),
    }
    path.write_text(json.dumps(payload, indent=2, default=_encode), encoding="utf-8")


def _encode(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def read_trajectory_csv(path: Path) -> tuple[Trajectory, dict[str, str]]:
    """Read a CSV written by :func:`write_trajectory_csv`.

    Args:
        path: Source ``.csv`` file path.

    Returns:
        Tuple of the rebuilt trajectory and the header metadata as strings.

    Raises:
        ValueError: If the header lacks ``layout``, ``n`` or ``m``.
    """
    meta: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
    missing = [key for key in ("layout", "n", "m") if key not in meta]
    if missing:
        raise ValueError(f"{path}: header lacks {', '.join(missing)}")

    df = pl.read_csv(path, comment_prefix="#")
    states = df.select(
        [name for name in df.columns if name != "t" and not name.startswith("Q")]
    )
    trajectory = Trajectory(
        t=df["t"].to_numpy(),
        states=states.to_numpy(),
        layout=Layout(meta["layout"]),
        n=int(meta["n"]),
        m=int(meta["m"]),
    )
    return trajectory, meta


def write_report_json(path: Path | None, report: Mapping[str, Any]) -> None:
    """Write a verification summary as JSON, to stdout when *path* is None."""
    text = json.dumps(report, indent=2)
    if path is None:
        sys.stdout.write(text + "\n")
        return
    _ensure_parent(path)
    path.write_text(text + "\n", encoding="utf-8")
