"""Quasi-velocity frame algebra.

A frame is the configuration-dependent matrix Ψ(q) mapping ordinary velocities
to quasi-velocities, u = Ψ(q) q̇, with inverse Φ(q) = Ψ(q)⁻¹.  The constraint
rows of Ψ are the rows aᵅᵢ(q) of the nonholonomic constraints aᵅᵢ(q) q̇ⁱ = 0,
so the matching quasi-velocities vanish along admissible motion.

Arrays are indexed from 0 internally.  The Hamel tensor is stored as
``gamma[s, p, q]`` for the coefficient γˢₚq.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from hamel_oc.errors import SingularFrame
from hamel_oc.numdiff import DEFAULT_STEP, central_jacobian

FloatArray = NDArray[np.float64]
PsiFunction = Callable[[FloatArray], FloatArray]

DEFAULT_COND_LIMIT = 1e8


@dataclass(frozen=True)
class QuasiFrame:
    """The map q ↦ Ψ(q) together with its dimensions.

    Attributes:
        n: Number of configuration coordinates.
        m: Number of nonholonomic constraints, ``0 <= m < n``.
        psi: Returns the n×n matrix Ψ(q).
        psi_jacobian: Optional analytic ∂Ψ/∂q as an array ``J[s, i, k]`` =
            ∂Ψˢᵢ/∂qᵏ.  Central differences are used when absent.
        fd_step: Relative finite-difference step for the Jacobian fallback.
        constrained: 0-based rows of Ψ holding the constraints.  Defaults to
            the first ``m`` rows.
        cond_limit: Condition-number threshold above which Ψ(q) is treated
            as singular.
        name: Label used in logs and reports.
    """

    n: int
    m: int
    psi: PsiFunction
    psi_jacobian: Callable[[FloatArray], FloatArray] | None = None
    fd_step: float = DEFAULT_STEP
    constrained: tuple[int, ...] | None = None
    cond_limit: float = DEFAULT_COND_LIMIT
    name: str = "frame"

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError(f"n must be positive, got {self.n}")
        if not 0 <= self.m < self.n:
            raise ValueError(f"m must satisfy 0 <= m < n={self.n}, got {self.m}")
        if self.fd_step <= 0:
            raise ValueError(f"fd_step must be positive, got {self.fd_step}")
        rows = tuple(range(self.m)) if self.constrained is None else self.constrained
        rows = tuple(int(r) for r in rows)
        if len(rows) != self.m or len(set(rows)) != self.m:
            raise ValueError(
                f"constrained must list {self.m} distinct rows, got {rows}"
            )
        if any(not 0 <= r < self.n for r in rows):
            raise ValueError(f"constrained rows out of range 0..{self.n - 1}: {rows}")
        object.__setattr__(self, "constrained", tuple(sorted(rows)))

    @property
    def k(self) -> int:
        """Number of free (unconstrained) quasi-velocities, ``n - m``."""
        return self.n - self.m

    @property
    def constrained_indices(self) -> NDArray[np.intp]:
        """0-based indices of the constrained quasi-velocities (σ slots)."""
        return np.array(self.constrained, dtype=np.intp)

    @property
    def free_indices(self) -> NDArray[np.intp]:
        """0-based indices of the free quasi-velocities (I slots)."""
        taken = set(self.constrained or ())
        return np.array([i for i in range(self.n) if i not in taken], dtype=np.intp)

    def expand(self, u_free: FloatArray) -> FloatArray:
        """Embed free components into a full n-vector with uᵅ = 0."""
        full = np.zeros(self.n)
        full[self.free_indices] = u_free
        return full


@dataclass(frozen=True, eq=False)
class HamelTensor:
    """Hamel coefficients γˢₚq at one configuration, ``gamma[s, p, q]``."""

    gamma: FloatArray

    def coefficient(self, s: int, p: int, q: int) -> float:
        """Return γˢₚq using the 1-based indices of the documentation."""
        return float(self.gamma[s - 1, p - 1, q - 1])

    def contract(self, weights: FloatArray, u: FloatArray) -> FloatArray:
        """Return the covector ``G_i = weights_j γʲ_si uˢ``."""
        return np.einsum("j,jsi,s->i", weights, self.gamma, u)


@dataclass(frozen=True, eq=False)
class FramePoint:
    """A frame evaluated at one configuration.

    Holds Ψ(q) and Φ(q) for the duration of a single right-hand-side pass so
    that repeated queries at the same q do not refactorise Ψ.
    """

    frame: QuasiFrame
    q: FloatArray
    psi: FloatArray
    phi: FloatArray
    condition: float
    _hamel: list[HamelTensor] = field(default_factory=list, repr=False)

    def hamel(self) -> HamelTensor:
        """Hamel tensor at ``q``, computed on first use."""
        if not self._hamel:
            jac = jacobian_at(self.frame, self.q)
            self._hamel.append(_assemble_hamel(jac, self.phi))
        return self._hamel[0]


def evaluate(frame: QuasiFrame, q: FloatArray) -> FramePoint:
    """Evaluate Ψ and Φ at *q*.

    Raises:
        SingularFrame: If the condition estimate of Ψ(q) exceeds
            ``frame.cond_limit`` or Ψ(q) is not finite.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (frame.n,):
        raise ValueError(f"q length {q.size}, expected {frame.n}")
    psi = np.asarray(frame.psi(q), dtype=float)
    if psi.shape != (frame.n, frame.n):
        raise ValueError(f"psi returned shape {psi.shape}, expected {(frame.n,) * 2}")
    if not np.all(np.isfinite(psi)):
        raise SingularFrame(q, float("inf"))
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = float(np.linalg.cond(psi))
    if not np.isfinite(condition) or condition > frame.cond_limit:
        raise SingularFrame(q, condition)
    phi = np.linalg.solve(psi, np.eye(frame.n))
    return FramePoint(frame=frame, q=q, psi=psi, phi=phi, condition=condition)


def phi_at(frame: QuasiFrame, q: FloatArray) -> FloatArray:
    """Return Φ(q) = Ψ(q)⁻¹."""
    return evaluate(frame, q).phi


def jacobian_at(frame: QuasiFrame, q: FloatArray) -> FloatArray:
    """Return ∂Ψˢᵢ/∂qᵏ as ``J[s, i, k]``, analytic when available."""
    q = np.asarray(q, dtype=float)
    if frame.psi_jacobian is not None:
        return np.asarray(frame.psi_jacobian(q), dtype=float)
    return central_jacobian(
        lambda x: np.asarray(frame.psi(x), dtype=float), q, frame.fd_step
    )


def _assemble_hamel(jac: FloatArray, phi: FloatArray) -> HamelTensor:
    # γˢₚq = (∂Ψˢᵢ/∂qʲ − ∂Ψˢⱼ/∂qⁱ) Φⁱₚ Φʲq
    curl = jac - jac.transpose(0, 2, 1)
    gamma = np.einsum("sij,ip,jq->spq", curl, phi, phi)
    return HamelTensor(gamma=0.5 * (gamma - gamma.transpose(0, 2, 1)))


def hamel_at(frame: QuasiFrame, q: FloatArray) -> HamelTensor:
    """Return the Hamel tensor at *q*, antisymmetric in its lower indices."""
    return evaluate(frame, q).hamel()


def to_quasi(frame: QuasiFrame, q: FloatArray, qdot: FloatArray) -> FloatArray:
    """Quasi-velocities u = Ψ(q) q̇."""
    return evaluate(frame, q).psi @ np.asarray(qdot, dtype=float)


def from_quasi(frame: QuasiFrame, q: FloatArray, u: FloatArray) -> FloatArray:
    """Ordinary velocities q̇ = Φ(q) u."""
    return evaluate(frame, q).phi @ np.asarray(u, dtype=float)


def constraint_residual(
    frame: QuasiFrame, q: FloatArray, qdot: FloatArray
) -> FloatArray:
    """The m constrained components of Ψ(q) q̇."""
    return to_quasi(frame, q, qdot)[frame.constrained_indices]


def control_fields(frame: QuasiFrame, q: FloatArray) -> FloatArray:
    """Columns Xⁱ_I = Φⁱ_I spanning the admissible velocities, shape (n, n-m)."""
    return phi_at(frame, q)[:, frame.free_indices]


def constant_frame(
    matrix: FloatArray, m: int = 0, name: str = "constant"
) -> QuasiFrame:
    """Frame with a configuration-independent Ψ; its Hamel tensor vanishes."""
    psi = np.array(matrix, dtype=float)
    n = psi.shape[0]
    return QuasiFrame(
        n=n,
        m=m,
        psi=lambda q: psi,
        psi_jacobian=lambda q: np.zeros((n, n, n)),
        name=name,
    )


def identity_frame(n: int, m: int = 0) -> QuasiFrame:
    """Frame with Ψ = I."""
    return constant_frame(np.eye(n), m=m, name="identity")
