"""Explicit first-order right-hand sides of the Boltzmann-Hamel systems.

Three systems are assembled from a frame and a problem definition:

* forward mechanics, ``(q, uᴬ)``, from the Boltzmann-Hamel equations of a
  constrained Lagrangian system;
* kinematic optimal control, ``(q, uᴵ, μ_σ)``;
* dynamic optimal control, ``(q, uᴬ, aᴬ, ȷᴬ, μ_σ)``.

The implicit equations for u̇ᴵ (kinematic) and ȷ̇ᴬ (dynamic) are made explicit
with one dense symmetric solve per evaluation.  γ-contractions run over the
full index range with the constrained slots of u set to zero.
"""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from hamel_oc.errors import SingularMass, UnsupportedLayout
from hamel_oc.frames import FramePoint, evaluate
from hamel_oc.numdiff import central_jacobian
from hamel_oc.phase import Layout, PhaseState, block_slices
from hamel_oc.problems import (
    DynamicOCP,
    DynamicPartials,
    KinematicOCP,
    MechanicalSystem,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Forces = Callable[[float], FloatArray]
Rhs = Callable[[float, FloatArray], FloatArray]

MASS_COND_LIMIT = 1e12


def _solve_symmetric(matrix: FloatArray, rhs: FloatArray, what: str) -> FloatArray:
    if matrix.size == 0:
        return np.zeros(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > MASS_COND_LIMIT:
        raise SingularMass(what, condition)
    return scipy.linalg.solve(matrix, rhs, assume_a="sym")


def _force_vector(
    forces: Forces | FloatArray | None, t: float, size: int
) -> FloatArray:
    if forces is None:
        return np.zeros(size)
    value = forces(t) if callable(forces) else forces
    value = np.asarray(value, dtype=float)
    if value.shape != (size,):
        raise ValueError(f"forces length {value.size}, expected {size}")
    return value


def _mechanics_terms(
    system: MechanicalSystem, point: FramePoint, u: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Return (quasi-mass, q̇, remainder) with mass·u̇ = remainder + Q."""
    frame = system.frame
    free = frame.free_indices
    qdot = point.phi @ u
    lag = system.partials(point.q, u)
    d_theta = point.phi.T @ lag.dq
    bracket = point.hamel().contract(lag.du, u)
    mass = lag.hess_uu[np.ix_(free, free)]
    remainder = d_theta[free] + bracket[free] - lag.hess_uq[free] @ qdot
    return mass, qdot, remainder


def mechanics_rhs(
    system: MechanicalSystem,
    forces: Forces | FloatArray | None,
    state: PhaseState,
    t: float = 0.0,
) -> FloatArray:
    """Forward Boltzmann-Hamel dynamics.

    Args:
        system: Constrained mechanical system.
        forces: Free generalized forces Q_I, as a function of time, a
            constant vector, or ``None`` for no forcing.
        state: Mechanics-layout state ``(q, uᴬ)``.
        t: Time passed to *forces*.

    Returns:
        ``(q̇, u̇ᴬ)`` as one flat vector.

    Raises:
        SingularMass: If the quasi-mass matrix ∂²𝓛/∂uᴵ∂uᴶ is singular.
    """
    if state.layout is not Layout.MECHANICS:
        raise UnsupportedLayout(
            f"mechanics_rhs needs a mechanics state, got {state.layout.value}"
        )
    frame = system.frame
    u = frame.expand(state.u)
    point = evaluate(frame, state.q)
    mass, qdot, remainder = _mechanics_terms(system, point, u)
    force = _force_vector(forces, t, frame.k)
    udot = _solve_symmetric(mass, remainder + force, "quasi-mass matrix")
    return np.concatenate([qdot, udot])


def recover_controls(
    system: MechanicalSystem, state: PhaseState, state_derivative: FloatArray
) -> FloatArray:
    """Control forces Q_I that realise the motion in *state_derivative*.

    Works for every layout: the ``u`` block of the derivative is u̇ᴬ.
    """
    frame = system.frame
    u = frame.expand(state.u)
    point = evaluate(frame, state.q)
    mass, _, remainder = _mechanics_terms(system, point, u)
    udot = np.asarray(state_derivative, dtype=float)[
        block_slices(state.layout, state.n, state.m)["u"]
    ]
    return mass @ udot - remainder


def kinematic_rhs(ocp: KinematicOCP, state: PhaseState) -> FloatArray:
    """Right-hand side of the kinematic optimal control equations.

    Returns ``(q̇, u̇ᴵ, μ̇_σ)`` where q̇ = Φu, u̇ᴵ solves
    ``hess_uu·u̇ + hess_uq·q̇ = ∂C/∂θᴵ + ∂C/∂uᴶ γᴶ_SI uˢ + μ_τ γᵗ_SI uˢ`` and
    ``μ̇_σ = ∂C/∂θᵅ + ∂C/∂uᴶ γᴶ_Sσ uˢ + μ_τ γᵗ_Sσ uˢ``.

    Raises:
        SingularFrame: At a chart singularity.
        SingularMass: If ∂²C/∂u∂u is singular.
    """
    if state.layout is not Layout.KINEMATIC:
        raise UnsupportedLayout(
            f"kinematic_rhs needs a kinematicOC state, got {state.layout.value}"
        )
    frame = ocp.frame
    free, con = frame.free_indices, frame.constrained_indices
    u_free = state.u
    u = frame.expand(u_free)
    point = evaluate(frame, state.q)
    qdot = point.phi @ u
    data = ocp.cost.partials(state.q, u_free)
    d_theta = point.phi.T @ data.dq

    weights = np.zeros(frame.n)
    weights[free] = data.du
    weights[con] = state.mu
    bracket = point.hamel().contract(weights, u)

    udot = _solve_symmetric(
        data.hess_uu, d_theta[free] + bracket[free] - data.hess_uq @ qdot, "hess_uu"
    )
    mudot = d_theta[con] + bracket[con]
    return np.concatenate([qdot, udot, mudot])


def _kappa_from(
    data: DynamicPartials, qdot: FloatArray, a: FloatArray, j: FloatArray
) -> FloatArray:
    # κ = ∂C/∂u − d/dt ∂C/∂a with the time derivative expanded by the chain rule
    return data.du - (data.hess_aa @ j + data.hess_au @ a + data.hess_aq @ qdot)


def kappa(
    ocp: DynamicOCP,
    q: FloatArray,
    u: FloatArray,
    a: FloatArray,
    j: FloatArray,
    *,
    point: FramePoint | None = None,
) -> FloatArray:
    """κ_J = ∂C/∂uᴶ − d/dt ∂C/∂aᴶ at one phase point.

    Args:
        ocp: Dynamic optimal control problem.
        q: Configuration.
        u: Free quasi-velocities.
        a: Free quasi-accelerations.
        j: Free quasi-jerks.
        point: Frame already evaluated at *q*, if the caller has one.
    """
    q = np.asarray(q, dtype=float)
    point = point if point is not None else evaluate(ocp.frame, q)
    qdot = point.phi @ ocp.frame.expand(u)
    data = ocp.cost.partials(q, u, a)
    return _kappa_from(
        data, qdot, np.asarray(a, dtype=float), np.asarray(j, dtype=float)
    )


def kappa_jacobians(
    ocp: DynamicOCP,
    q: FloatArray,
    u: FloatArray,
    a: FloatArray,
    j: FloatArray,
    *,
    point: FramePoint | None = None,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Return (∂κ/∂q, ∂κ/∂u, ∂κ/∂a), analytic when the cost supplies them."""
    if ocp.cost.kappa_grad is not None:
        kq, ku, ka = ocp.cost.kappa_grad(q, u, a, j)
        return (
            np.asarray(kq, dtype=float),
            np.asarray(ku, dtype=float),
            np.asarray(ka, dtype=float),
        )
    point = point if point is not None else evaluate(ocp.frame, q)
    kq = central_jacobian(lambda x: kappa(ocp, x, u, a, j), q)
    ku = central_jacobian(lambda x: kappa(ocp, q, x, a, j, point=point), u)
    ka = central_jacobian(lambda x: kappa(ocp, q, u, x, j, point=point), a)
    return kq, ku, ka


def dynamic_rhs(ocp: DynamicOCP, state: PhaseState) -> FloatArray:
    """Right-hand side of the dynamic optimal control equations.

    Returns ``(q̇, u̇ᴬ, ȧᴬ, ȷ̇ᴬ, μ̇_σ)``.  ȷ̇ᴬ follows from writing κ̇ by the
    chain rule, with ∂κ/∂ȷ = −∂²C/∂a∂a, and equating it to
    ``∂C/∂θᴬ + κ_J γᴶ_SA uˢ + μ_τ γᵗ_SA uˢ``.

    Raises:
        SingularFrame: At a chart singularity.
        SingularMass: If ∂²C/∂a∂a is singular.
    """
    if state.layout is not Layout.DYNAMIC:
        raise UnsupportedLayout(
            f"dynamic_rhs needs a dynamicOC state, got {state.layout.value}"
        )
    frame = ocp.frame
    free, con = frame.free_indices, frame.constrained_indices
    q, u_free, a, j = state.q, state.u, state.a, state.j
    u = frame.expand(u_free)
    point = evaluate(frame, q)
    qdot = point.phi @ u
    data = ocp.cost.partials(q, u_free, a)
    kap = _kappa_from(data, qdot, a, j)
    kq, ku, ka = kappa_jacobians(ocp, q, u_free, a, j, point=point)
    d_theta = point.phi.T @ data.dq

    weights = np.zeros(frame.n)
    weights[free] = kap
    weights[con] = state.mu
    bracket = point.hamel().contract(weights, u)

    kappa_rate = d_theta[free] + bracket[free]
    jdot = _solve_symmetric(
        data.hess_aa, kq @ qdot + ku @ a + ka @ j - kappa_rate, "hess_aa"
    )
    mudot = d_theta[con] + bracket[con]
    return np.concatenate([qdot, a, j, jdot, mudot])


def rhs_function(
    problem: KinematicOCP | DynamicOCP | MechanicalSystem,
    forces: Forces | FloatArray | None = None,
) -> Rhs:
    """Wrap an assembled system as ``f(t, y) -> ẏ`` on flat vectors."""
    if isinstance(problem, KinematicOCP):
        n, m = problem.frame.n, problem.frame.m

        def kinematic(t: float, y: FloatArray) -> FloatArray:
            return kinematic_rhs(problem, PhaseState(Layout.KINEMATIC, n, m, y))

        return kinematic
    if isinstance(problem, DynamicOCP):
        n, m = problem.frame.n, problem.frame.m

        def dynamic(t: float, y: FloatArray) -> FloatArray:
            return dynamic_rhs(problem, PhaseState(Layout.DYNAMIC, n, m, y))

        return dynamic
    if isinstance(problem, MechanicalSystem):
        n, m = problem.frame.n, problem.frame.m

        def mechanics(t: float, y: FloatArray) -> FloatArray:
            state = PhaseState(Layout.MECHANICS, n, m, y)
            return mechanics_rhs(problem, forces, state, t)

        return mechanics
    raise TypeError(f"cannot assemble a right-hand side for {type(problem).__name__}")


def layout_of(problem: KinematicOCP | DynamicOCP | MechanicalSystem) -> Layout:
    """State layout produced by :func:`rhs_function` for *problem*."""
    if isinstance(problem, KinematicOCP):
        return Layout.KINEMATIC
    if isinstance(problem, DynamicOCP):
        return Layout.DYNAMIC
    return Layout.MECHANICS
