"""Exception hierarchy shared by every ``hamel_oc`` module.

Index values quoted in messages are 1-based.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np


class HamelError(Exception):
    """Base class for all ``hamel_oc`` errors."""


class SingularFrame(HamelError):
    """Ψ(q) is numerically singular at the queried configuration."""

    def __init__(self, q: Sequence[float], condition: float) -> None:
        self.q = np.asarray(q, dtype=float).copy()
        self.condition = condition
        coords = ", ".join(f"{v:.6g}" for v in self.q)
        super().__init__(
            f"quasi-velocity frame singular at q=({coords}) "
            f"(condition estimate {condition:.3g})"
        )


class SingularMass(HamelError):
    """A Hessian that must be inverted (quasi-mass or ∂²C/∂a∂a) is singular."""

    def __init__(self, what: str, condition: float) -> None:
        self.what = what
        self.condition = condition
        super().__init__(f"{what} is singular (condition estimate {condition:.3g})")


class InvalidProblem(HamelError):
    """A problem definition failed validation.

    Attributes:
        issues: Field-level messages, one per failed check.
    """

    def __init__(self, issues: Sequence[str]) -> None:
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class NoConvergence(HamelError):
    """Newton shooting gave up before the boundary residual reached tolerance."""

    def __init__(
        self,
        reason: str,
        *,
        unknowns: np.ndarray,
        residual: float,
        iterations: int,
    ) -> None:
        self.reason = reason
        self.unknowns = np.asarray(unknowns, dtype=float).copy()
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"{reason} after {iterations} iterations (best residual {residual:.3e})"
        )


class SingularJacobian(HamelError):
    """The shooting Jacobian carries no usable information."""


class UnknownModel(HamelError):
    """A model name is not in the registry."""

    def __init__(self, name: str, valid: Sequence[str]) -> None:
        self.name = name
        self.valid = list(valid)
        super().__init__(
            f"unknown model '{name}'; valid names: {', '.join(self.valid)}"
        )


class UnsupportedLayout(HamelError):
    """A model or operation does not support the requested state layout."""


class ConfigError(HamelError):
    """A scenario configuration or CLI value is malformed."""
