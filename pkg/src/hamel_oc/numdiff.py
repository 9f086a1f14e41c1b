"""Central finite differences used wherever an analytic derivative is absent."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

DEFAULT_STEP = 1e-5
# Nested differences (a difference of a difference) need a wider step.
NESTED_STEP = 1e-4


def scaled_step(x: FloatArray, step: float) -> float:
    """Return ``step * max(1, ||x||_inf)``."""
    if x.size == 0:
        return step
    return step * max(1.0, float(np.max(np.abs(x))))


def central_jacobian(
    func: Callable[[FloatArray], FloatArray | float],
    x: FloatArray,
    step: float = DEFAULT_STEP,
) -> FloatArray:
    """Central-difference Jacobian of *func* at *x*.

    Args:
        func: Maps a 1-D array to an array of any shape (or a scalar).
        x: Evaluation point.
        step: Relative step, scaled by ``max(1, ||x||_inf)``.

    Returns:
        Array of shape ``func(x).shape + (len(x),)``; the last axis indexes
        the differentiation variable.
    """
    x = np.asarray(x, dtype=float)
    h = scaled_step(x, step)
    columns = []
    for k in range(x.size):
        dx = np.zeros_like(x)
        dx[k] = h
        forward = np.asarray(func(x + dx), dtype=float)
        backward = np.asarray(func(x - dx), dtype=float)
        columns.append((forward - backward) / (2.0 * h))
    if not columns:
        shape = np.shape(func(x))
        return np.zeros(shape + (0,))
    return np.stack(columns, axis=-1)


def central_gradient(
    func: Callable[[FloatArray], float],
    x: FloatArray,
    step: float = DEFAULT_STEP,
) -> FloatArray:
    """Central-difference gradient of a scalar function."""
    return central_jacobian(func, x, step).reshape(-1)
