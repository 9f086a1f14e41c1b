"""Problem definitions: costs, mechanical Lagrangians and boundary conditions.

Costs only see the free quasi-velocity components.  Every partial-derivative
supplier is optional; absent ones are filled by central differences.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from hamel_oc.errors import InvalidProblem, SingularFrame
from hamel_oc.frames import QuasiFrame, evaluate
from hamel_oc.numdiff import (
    DEFAULT_STEP,
    NESTED_STEP,
    central_gradient,
    central_jacobian,
)

FloatArray = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class KinematicPartials:
    """Cost data of a kinematic problem evaluated at one point."""

    value: float
    dq: FloatArray
    du: FloatArray
    hess_uu: FloatArray
    hess_uq: FloatArray


@dataclass(frozen=True, eq=False)
class DynamicPartials:
    """Cost data of a dynamic problem evaluated at one point."""

    value: float
    dq: FloatArray
    du: FloatArray
    da: FloatArray
    hess_aa: FloatArray
    hess_au: FloatArray
    hess_aq: FloatArray


@dataclass(frozen=True)
class CostKinematic:
    """Integrand C(q, u) of a kinematic optimal control problem.

    ``u`` is the (n-m)-vector of free quasi-velocities.  ``hess_uq`` has
    shape (n-m, n).
    """

    c: Callable[[FloatArray, FloatArray], float]
    dq: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    du: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    hess_uu: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    hess_uq: Callable[[FloatArray, FloatArray], FloatArray] | None = None

    def grad_u(self, q: FloatArray, u: FloatArray) -> FloatArray:
        if self.du is not None:
            return np.asarray(self.du(q, u), dtype=float)
        return central_gradient(lambda x: self.c(q, x), u)

    def partials(self, q: FloatArray, u: FloatArray) -> KinematicPartials:
        """Evaluate C and all partials at (q, u), analytic where supplied."""
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        inner = DEFAULT_STEP if self.du is not None else NESTED_STEP
        if self.dq is not None:
            dq = np.asarray(self.dq(q, u), dtype=float)
        else:
            dq = central_gradient(lambda x: self.c(x, u), q)
        if self.hess_uu is not None:
            huu = np.asarray(self.hess_uu(q, u), dtype=float)
        else:
            huu = central_jacobian(lambda x: self.grad_u(q, x), u, inner)
            huu = 0.5 * (huu + huu.T)
        if self.hess_uq is not None:
            huq = np.asarray(self.hess_uq(q, u), dtype=float)
        else:
            huq = central_jacobian(lambda x: self.grad_u(x, u), q, inner)
        return KinematicPartials(
            value=float(self.c(q, u)),
            dq=dq,
            du=self.grad_u(q, u),
            hess_uu=huu,
            hess_uq=huq,
        )


@dataclass(frozen=True)
class CostDynamic:
    """Integrand C(q, u, a) of a dynamic optimal control problem.

    ``u`` and ``a`` are free quasi-velocities and quasi-accelerations.
    ``hess_au[I, J]`` is ∂²C/∂aᴵ∂uᴶ and ``hess_aq`` has shape (n-m, n).
    ``kappa_grad``, when supplied, returns the triple (∂κ/∂q, ∂κ/∂u, ∂κ/∂a)
    at (q, u, a, j); otherwise those derivatives are taken by central
    differences of the κ-vector.
    """

    c: Callable[[FloatArray, FloatArray, FloatArray], float]
    dq: Callable[[FloatArray, FloatArray, FloatArray], FloatArray] | None = None
    du: Callable[[FloatArray, FloatArray, FloatArray], FloatArray] | None = None
    da: Callable[[FloatArray, FloatArray, FloatArray], FloatArray] | None = None
    hess_aa: Callable[[FloatArray, FloatArray, FloatArray], FloatArray] | None = None
    hess_au: Callable[[FloatArray, FloatArray, FloatArray], FloatArray] | None = None
    hess_aq: Callable[[FloatArray, FloatArray, FloatArray], FloatArray] | None = None
    kappa_grad: (
        Callable[
            [FloatArray, FloatArray, FloatArray, FloatArray],
            tuple[FloatArray, FloatArray, FloatArray],
        ]
        | None
    ) = None

    def grad_a(self, q: FloatArray, u: FloatArray, a: FloatArray) -> FloatArray:
        if self.da is not None:
            return np.asarray(self.da(q, u, a), dtype=float)
        return central_gradient(lambda x: self.c(q, u, x), a)

    def partials(self, q: FloatArray, u: FloatArray, a: FloatArray) -> DynamicPartials:
        """Evaluate C and all partials at (q, u, a), analytic where supplied."""
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        a = np.asarray(a, dtype=float)
        inner = DEFAULT_STEP if self.da is not None else NESTED_STEP
        if self.dq is not None:
            dq = np.asarray(self.dq(q, u, a), dtype=float)
        else:
            dq = central_gradient(lambda x: self.c(x, u, a), q)
        if self.du is not None:
            du = np.asarray(self.du(q, u, a), dtype=float)
        else:
            du = central_gradient(lambda x: self.c(q, x, a), u)
        if self.hess_aa is not None:
            haa = np.asarray(self.hess_aa(q, u, a), dtype=float)
        else:
            haa = central_jacobian(lambda x: self.grad_a(q, u, x), a, inner)
            haa = 0.5 * (haa + haa.T)
        if self.hess_au is not None:
            hau = np.asarray(self.hess_au(q, u, a), dtype=float)
        else:
            hau = central_jacobian(lambda x: self.grad_a(q, x, a), u, inner)
        if self.hess_aq is not None:
            haq = np.asarray(self.hess_aq(q, u, a), dtype=float)
        else:
            haq = central_jacobian(lambda x: self.grad_a(x, u, a), q, inner)
        return DynamicPartials(
            value=float(self.c(q, u, a)),
            dq=dq,
            du=du,
            da=self.grad_a(q, u, a),
            hess_aa=haa,
            hess_au=hau,
            hess_aq=haq,
        )


@dataclass(frozen=True, eq=False)
class LagrangianPartials:
    """Unconstrained Lagrangian data at one point, all in full n-vectors."""

    value: float
    dq: FloatArray
    du: FloatArray
    hess_uu: FloatArray
    hess_uq: FloatArray


@dataclass(frozen=True)
class MechanicalSystem:
    """Unconstrained Lagrangian 𝓛(q, u) re-expressed in quasi-velocities.

    ``lagrangian`` takes the full n-vector u; the constraints uᵅ = 0 are
    applied only after differentiation.
    """

    frame: QuasiFrame
    lagrangian: Callable[[FloatArray, FloatArray], float]
    dq: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    du: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    hess_uu: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    hess_uq: Callable[[FloatArray, FloatArray], FloatArray] | None = None
    name: str = "system"

    def _grad_u(self, q: FloatArray, u: FloatArray) -> FloatArray:
        if self.du is not None:
            return np.asarray(self.du(q, u), dtype=float)
        return central_gradient(lambda x: self.lagrangian(q, x), u)

    def partials(self, q: FloatArray, u: FloatArray) -> LagrangianPartials:
        """Evaluate 𝓛 and its partials at (q, u) with u the full n-vector."""
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        inner = DEFAULT_STEP if self.du is not None else NESTED_STEP
        if self.dq is not None:
            dq = np.asarray(self.dq(q, u), dtype=float)
        else:
            dq = central_gradient(lambda x: self.lagrangian(x, u), q)
        if self.hess_uu is not None:
            huu = np.asarray(self.hess_uu(q, u), dtype=float)
        else:
            huu = central_jacobian(lambda x: self._grad_u(q, x), u, inner)
            huu = 0.5 * (huu + huu.T)
        if self.hess_uq is not None:
            huq = np.asarray(self.hess_uq(q, u), dtype=float)
        else:
            huq = central_jacobian(lambda x: self._grad_u(x, u), q, inner)
        return LagrangianPartials(
            value=float(self.lagrangian(q, u)),
            dq=dq,
            du=self._grad_u(q, u),
            hess_uu=huu,
            hess_uq=huq,
        )

    def generalized_forces(self, q: FloatArray, force: FloatArray) -> FloatArray:
        """Free components of Q_i = Φʲᵢ F_j for a force F in ordinary coordinates."""
        phi = evaluate(self.frame, q).phi
        return (phi.T @ np.asarray(force, dtype=float))[self.frame.free_indices]


@dataclass(frozen=True, eq=False)
class BoundaryConditions:
    """Endpoint data of a two-point boundary value problem.

    Dynamic problems carry both endpoint free quasi-velocities; kinematic
    problems carry configurations only.
    """

    t0: float
    t1: float
    q0: FloatArray
    q1: FloatArray
    u0_free: FloatArray | None = None
    u1_free: FloatArray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "q0", np.asarray(self.q0, dtype=float))
        object.__setattr__(self, "q1", np.asarray(self.q1, dtype=float))
        for name in ("u0_free", "u1_free"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, dtype=float))

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


@dataclass(frozen=True)
class KinematicOCP:
    """Kinematic optimal control problem: controls are the free uᴵ."""

    frame: QuasiFrame
    cost: CostKinematic
    bc: BoundaryConditions | None = None
    name: str = "kinematic"


@dataclass(frozen=True)
class DynamicOCP:
    """Dynamic optimal control problem: controls enter through the free aᴬ.

    ``mechanical`` is the system whose Boltzmann-Hamel equations turn the
    optimal quasi-accelerations back into control forces.
    """

    frame: QuasiFrame
    cost: CostDynamic
    mechanical: MechanicalSystem | None = None
    bc: BoundaryConditions | None = None
    name: str = "dynamic"


Problem = KinematicOCP | DynamicOCP


def fd_partials(
    cost: CostKinematic | CostDynamic,
    q: FloatArray,
    u: FloatArray,
    a: FloatArray | None = None,
) -> KinematicPartials | DynamicPartials:
    """Evaluate every partial of *cost*, differencing the unsupplied ones.

    Args:
        cost: Kinematic or dynamic cost integrand.
        q: Configuration.
        u: Free quasi-velocities.
        a: Free quasi-accelerations; required for dynamic costs.
    """
    if isinstance(cost, CostDynamic):
        if a is None:
            raise ValueError("dynamic cost partials need quasi-accelerations a")
        return cost.partials(q, u, a)
    return cost.partials(q, u)


@dataclass
class ProblemReport:
    """Outcome of :func:`validate`.

    Attributes:
        issues: Field-level problems; empty for a well-formed problem.
        conditions: Condition estimate of Ψ at each checked endpoint.
        hessian_min_eigenvalue: Smallest eigenvalue of the control Hessian at
            the sample point.
    """

    issues: list[str] = field(default_factory=list)
    conditions: dict[str, float] = field(default_factory=dict)
    hessian_min_eigenvalue: float | None = None

    def __bool__(self) -> bool:
        return bool(self.issues)


def _check_vector(
    issues: list[str], name: str, value: FloatArray | None, expected: int
) -> bool:
    if value is None:
        issues.append(f"{name} required")
        return False
    if value.ndim != 1 or value.size != expected:
        issues.append(f"{name} length {value.size}, expected {expected}")
        return False
    if not np.all(np.isfinite(value)):
        issues.append(f"{name} contains non-finite values")
        return False
    return True


def validate(problem: Problem, bc: BoundaryConditions | None = None) -> ProblemReport:
    """Check dimensions, frame invertibility and Hessian definiteness.

    Args:
        problem: Kinematic or dynamic optimal control problem.
        bc: Boundary conditions; defaults to ``problem.bc``.

    Returns:
        A report with no issues.

    Raises:
        InvalidProblem: Listing every failed check.
    """
    bc = bc if bc is not None else problem.bc
    frame = problem.frame
    report = ProblemReport()
    issues = report.issues
    dynamic = isinstance(problem, DynamicOCP)

    if bc is None:
        raise InvalidProblem(["bc required"])
    if not bc.t1 > bc.t0:
        issues.append(f"t1 ({bc.t1}) must exceed t0 ({bc.t0})")
    endpoints_ok = _check_vector(issues, "q0", bc.q0, frame.n)
    endpoints_ok &= _check_vector(issues, "q1", bc.q1, frame.n)
    if dynamic:
        _check_vector(issues, "u0_free", bc.u0_free, frame.k)
        _check_vector(issues, "u1_free", bc.u1_free, frame.k)
    else:
        for name in ("u0_free", "u1_free"):
            if getattr(bc, name) is not None:
                issues.append(f"{name} not used by kinematic problems")

    if endpoints_ok:
        for name, q in (("q0", bc.q0), ("q1", bc.q1)):
            try:
                report.conditions[name] = evaluate(frame, q).condition
            except SingularFrame as exc:
                issues.append(f"{name}: {exc}")

        zeros = np.zeros(frame.k)
        try:
            if dynamic:
                data = problem.cost.partials(bc.q0, zeros, zeros)
                hessian = data.hess_aa
                label = "hess_aa"
            else:
                data = problem.cost.partials(bc.q0, zeros)
                hessian = data.hess_uu
                label = "hess_uu"
        except Exception as exc:  # user callables may fail arbitrarily
            issues.append(f"cost: evaluation failed at q0 ({exc})")
        else:
            if not np.isfinite(data.value):
                issues.append("cost: non-finite value at q0")
            elif hessian.shape != (frame.k, frame.k):
                issues.append(
                    f"cost: {label} shape {hessian.shape}, expected "
                    f"{(frame.k, frame.k)}"
                )
            else:
                eigen = np.linalg.eigvalsh(0.5 * (hessian + hessian.T))
                report.hessian_min_eigenvalue = float(eigen[0]) if eigen.size else None
                if eigen.size and eigen[0] <= 0:
                    issues.append(f"cost: {label} not positive definite at q0")

    if issues:
        raise InvalidProblem(issues)
    return report
