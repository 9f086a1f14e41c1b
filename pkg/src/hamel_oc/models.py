"""Built-in systems: frames, costs, Lagrangians, reference equations and scenarios.

Each model carries hand-written reference right-hand sides, transcribed
equation by equation from the closed-form optimal control systems of the
worked examples, so that the generic assembly can be checked against them.

========================= == == =========================== ======================
Name                      n  m  Layouts                     Coordinates
========================= == == =========================== ======================
``heisenberg``            3  1  kinematicOC                 (x, y, z)
``vertical_disc_kin``     4  2  kinematicOC                 (x, y, θ, φ)
``vertical_disc_dyn``     4  2  dynamicOC, mechanics        (x, y, θ, φ)
``falling_disc_kin``      5  2  kinematicOC                 (φ, θ, ψ, x, y)
``rigid_body_dyn``        3  0  dynamicOC, mechanics        (ψ, θ, φ)
``sphere_dyn``            3  0  dynamicOC, mechanics        (ψ, θ, φ)
========================= == == =========================== ======================
"""

from __future__ import annotations

import inspect
import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from hamel_oc.errors import ConfigError, UnknownModel, UnsupportedLayout
from hamel_oc.frames import QuasiFrame
from hamel_oc.phase import Layout, PhaseState
from hamel_oc.problems import (
    BoundaryConditions,
    CostDynamic,
    CostKinematic,
    DynamicOCP,
    KinematicOCP,
    MechanicalSystem,
    Problem,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ReferenceRhs = Callable[[PhaseState, FloatArray], FloatArray]
Monitor = Callable[[PhaseState], dict[str, FloatArray]]

HALF_PI = 0.5 * np.pi
# Euler-angle charts are kept this far from their singular tilt.
CHART_MARGIN = 0.2


@dataclass(frozen=True, eq=False)
class Scenario:
    """Named boundary data for one layout of a model.

    Mechanics scenarios are initial-value problems: only ``t0``, ``t1``,
    ``q0`` and ``u0_free`` of ``bc`` are used.
    """

    name: str
    layout: Layout
    bc: BoundaryConditions
    guess: FloatArray | None = None
    steps: int | None = None
    description: str = ""


@dataclass(frozen=True, eq=False)
class BuiltinModel:
    """A fully populated built-in system.

    Attributes:
        name: Registry key.
        frame: Quasi-velocity frame.
        coordinates: Names of the configuration coordinates.
        kinematic_ocp: Kinematic optimal control problem, if any.
        dynamic_ocp: Dynamic optimal control problem, if any.
        mechanical: Mechanical system for forward dynamics and control
            recovery, if any.
        references: Reference right-hand side per supported layout.  Each
            takes a state and a force vector (ignored outside mechanics).
        monitors: Quantities conserved along force-free flows, per layout.
        scenarios: Named boundary data.
        aliases: Alternative scenario names mapped to their registry keys.
        params: Physical constants, derived ones included.
        box: Lower and upper corners of the chart-interior sampling box.
        description: One-line summary.
    """

    name: str
    frame: QuasiFrame
    coordinates: tuple[str, ...]
    kinematic_ocp: KinematicOCP | None = None
    dynamic_ocp: DynamicOCP | None = None
    mechanical: MechanicalSystem | None = None
    references: Mapping[Layout, ReferenceRhs] = field(default_factory=dict)
    monitors: Mapping[Layout, Monitor] = field(default_factory=dict)
    scenarios: Mapping[str, Scenario] = field(default_factory=dict)
    aliases: Mapping[str, str] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)
    box: tuple[FloatArray, FloatArray] = field(
        default_factory=lambda: (np.zeros(0), np.zeros(0))
    )
    description: str = ""

    @property
    def layouts(self) -> tuple[Layout, ...]:
        """Supported layouts, the optimal control one first."""
        found = []
        if self.kinematic_ocp is not None:
            found.append(Layout.KINEMATIC)
        if self.dynamic_ocp is not None:
            found.append(Layout.DYNAMIC)
        if self.mechanical is not None:
            found.append(Layout.MECHANICS)
        return tuple(found)

    def problem(self, layout: Layout) -> Problem | MechanicalSystem:
        """Return the problem assembled for *layout*.

        Raises:
            UnsupportedLayout: If the model has no such problem.
        """
        target = {
            Layout.KINEMATIC: self.kinematic_ocp,
            Layout.DYNAMIC: self.dynamic_ocp,
            Layout.MECHANICS: self.mechanical,
        }[layout]
        if target is None:
            raise UnsupportedLayout(
                f"model '{self.name}' does not support the {layout.value} layout"
            )
        return target

    def scenario(self, name: str) -> Scenario:
        """Look up a named scenario.

        Raises:
            ConfigError: Listing the valid names when *name* is unknown.
        """
        try:
            return self.scenarios[self.aliases.get(name, name)]
        except KeyError:
            valid = ", ".join([*self.scenarios, *self.aliases])
            raise ConfigError(
                f"model '{self.name}' has no scenario '{name}'; valid: {valid}"
            ) from None


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------


def skew(v: FloatArray) -> FloatArray:
    """Matrix S(v) with S(v) w = v × w."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def _speed_cost(k: int, n: int) -> CostKinematic:
    """C = ½‖u‖² over the k free quasi-velocities."""
    return CostKinematic(
        c=lambda q, u: 0.5 * float(u @ u),
        dq=lambda q, u: np.zeros(n),
        du=lambda q, u: np.asarray(u, dtype=float).copy(),
        hess_uu=lambda q, u: np.eye(k),
        hess_uq=lambda q, u: np.zeros((k, n)),
    )


def _multiplier_monitor(state: PhaseState) -> dict[str, FloatArray]:
    return {"mu": state.mu}


def _sample_box(
    lower: list[float], upper: list[float]
) -> tuple[FloatArray, FloatArray]:
    return np.array(lower, dtype=float), np.array(upper, dtype=float)


def _positive(params: dict[str, float]) -> None:
    for key, value in params.items():
        if not np.isfinite(value) or value <= 0:
            raise ConfigError(f"model.params.{key}: must be positive, got {value}")


def _rest(
    layout: Layout, n: int, k: int, t1: float = 1.0, description: str = ""
) -> Scenario:
    """Zero-motion scenario: q1 = q0 = 0 with zero endpoint rates."""
    dynamic = layout is not Layout.KINEMATIC
    return Scenario(
        name="rest",
        layout=layout,
        bc=BoundaryConditions(
            t0=0.0,
            t1=t1,
            q0=np.zeros(n),
            q1=np.zeros(n),
            u0_free=np.zeros(k) if dynamic else None,
            u1_free=np.zeros(k) if dynamic else None,
        ),
        description=description or "stay at the origin; the optimum is zero motion",
    )


# ---------------------------------------------------------------------------
# Heisenberg system
# ---------------------------------------------------------------------------


def _heisenberg_psi(q: FloatArray) -> FloatArray:
    x, y, _ = q
    return np.array([[y, -x, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _heisenberg_jacobian(q: FloatArray) -> FloatArray:
    jac = np.zeros((3, 3, 3))
    jac[0, 0, 1] = 1.0
    jac[0, 1, 0] = -1.0
    return jac


def _heisenberg_reference(state: PhaseState, forces: FloatArray) -> FloatArray:
    x, y, _ = state.q
    u2, u3 = state.u
    (mu,) = state.mu
    # ż follows Φ: the u₁ term vanishes on the constraint
    return np.array(
        [u2, u3, y * u2 - x * u3, -2.0 * mu * u3, 2.0 * mu * u2, 0.0]
    )


def _heisenberg_monitor(state: PhaseState) -> dict[str, FloatArray]:
    u = state.u
    return {"mu": state.mu, "speed_sq": np.array([u @ u])}


def _build_heisenberg() -> BuiltinModel:
    frame = QuasiFrame(
        n=3,
        m=1,
        psi=_heisenberg_psi,
        psi_jacobian=_heisenberg_jacobian,
        name="heisenberg",
    )
    ocp = KinematicOCP(frame=frame, cost=_speed_cost(2, 3), name="heisenberg")
    steer = Scenario(
        name="steer_z",
        layout=Layout.KINEMATIC,
        bc=BoundaryConditions(0.0, 1.0, np.zeros(3), np.array([0.0, 0.0, 1.0])),
        guess=np.array([2.5, 0.0, -3.0]),
        description="lift the particle by one unit along z in unit time",
    )
    return BuiltinModel(
        name="heisenberg",
        frame=frame,
        coordinates=("x", "y", "z"),
        kinematic_ocp=ocp,
        references={Layout.KINEMATIC: _heisenberg_reference},
        monitors={Layout.KINEMATIC: _heisenberg_monitor},
        scenarios={
            "steer_z": steer,
            "rest": _rest(Layout.KINEMATIC, 3, 2),
        },
        box=_sample_box([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]),
        description="Heisenberg system with velocity controls on x and y",
    )


# ---------------------------------------------------------------------------
# Vertical rolling disc
# ---------------------------------------------------------------------------


def _disc_psi(q: FloatArray) -> FloatArray:
    phi = q[3]
    return np.array(
        [
            [1.0, 0.0, -np.cos(phi), 0.0],
            [0.0, 1.0, -np.sin(phi), 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _disc_jacobian(q: FloatArray) -> FloatArray:
    phi = q[3]
    jac = np.zeros((4, 4, 4))
    jac[0, 2, 3] = np.sin(phi)
    jac[1, 2, 3] = -np.cos(phi)
    return jac


def _disc_frame() -> QuasiFrame:
    return QuasiFrame(
        n=4, m=2, psi=_disc_psi, psi_jacobian=_disc_jacobian, name="vertical_disc"
    )


def _disc_kinematics(q: FloatArray, u3: float, u4: float) -> FloatArray:
    phi = q[3]
    return np.array([np.cos(phi) * u3, np.sin(phi) * u3, u3, u4])


def _disc_coupling(q: FloatArray, mu: FloatArray) -> float:
    phi = q[3]
    return mu[1] * np.cos(phi) - mu[0] * np.sin(phi)


def _disc_kin_reference(state: PhaseState, forces: FloatArray) -> FloatArray:
    u3, u4 = state.u
    coupling = _disc_coupling(state.q, state.mu)
    return np.concatenate(
        [
            _disc_kinematics(state.q, u3, u4),
            [coupling * u4, -coupling * u3],
            [0.0, 0.0],
        ]
    )


_DISC_BOX = _sample_box([-1.0, -1.0, -np.pi, -np.pi], [1.0, 1.0, np.pi, np.pi])


def _build_vertical_disc_kin() -> BuiltinModel:
    frame = _disc_frame()
    ocp = KinematicOCP(frame=frame, cost=_speed_cost(2, 4), name="vertical_disc_kin")
    drive = Scenario(
        name="drive",
        layout=Layout.KINEMATIC,
        bc=BoundaryConditions(0.0, 1.0, np.zeros(4), np.array([1.0, 0.0, 1.0, 0.0])),
        description="roll one unit straight along x",
    )
    # Off the constant-rate arc through (1, 0.5), so the default guess misses.
    swerve = Scenario(
        name="swerve",
        layout=Layout.KINEMATIC,
        bc=BoundaryConditions(0.0, 1.0, np.zeros(4), np.array([0.95, 0.3, 1.0, 0.5])),
        description="roll one unit, turn half a radian and drift 0.3 sideways",
    )
    return BuiltinModel(
        name="vertical_disc_kin",
        frame=frame,
        coordinates=("x", "y", "theta", "phi"),
        kinematic_ocp=ocp,
        references={Layout.KINEMATIC: _disc_kin_reference},
        monitors={Layout.KINEMATIC: _multiplier_monitor},
        scenarios={
            "drive": drive,
            "swerve": swerve,
            "rest": _rest(Layout.KINEMATIC, 4, 2),
        },
        box=_DISC_BOX,
        description="vertical rolling disc with rolling and turning rate controls",
    )


def _build_vertical_disc_dyn(
    mass: float = 1.0, rolling_inertia: float = 0.5, turning_inertia: float = 0.25
) -> BuiltinModel:
    params = {
        "mass": mass,
        "rolling_inertia": rolling_inertia,
        "turning_inertia": turning_inertia,
    }
    _positive(params)
    frame = _disc_frame()
    # w₃ = (m + I) a₃ and w₄ = J a₄
    roll = mass + rolling_inertia
    turn = turning_inertia
    weights = np.array([roll**2, turn**2])

    cost = CostDynamic(
        c=lambda q, u, a: 0.5 * float(weights @ (a * a)),
        dq=lambda q, u, a: np.zeros(4),
        du=lambda q, u, a: np.zeros(2),
        da=lambda q, u, a: weights * a,
        hess_aa=lambda q, u, a: np.diag(weights),
        hess_au=lambda q, u, a: np.zeros((2, 2)),
        hess_aq=lambda q, u, a: np.zeros((2, 4)),
        kappa_grad=lambda q, u, a, j: (
            np.zeros((2, 4)),
            np.zeros((2, 2)),
            np.zeros((2, 2)),
        ),
    )

    def velocity(q: FloatArray, u: FloatArray) -> tuple[float, float]:
        phi = q[3]
        return u[0] + np.cos(phi) * u[2], u[1] + np.sin(phi) * u[2]

    def lagrangian(q: FloatArray, u: FloatArray) -> float:
        vx, vy = velocity(q, u)
        return 0.5 * (
            mass * (vx**2 + vy**2) + rolling_inertia * u[2] ** 2 + turn * u[3] ** 2
        )

    def lag_dq(q: FloatArray, u: FloatArray) -> FloatArray:
        phi = q[3]
        vx, vy = velocity(q, u)
        grad = np.zeros(4)
        grad[3] = mass * u[2] * (vy * np.cos(phi) - vx * np.sin(phi))
        return grad

    def lag_du(q: FloatArray, u: FloatArray) -> FloatArray:
        phi = q[3]
        vx, vy = velocity(q, u)
        return np.array(
            [
                mass * vx,
                mass * vy,
                mass * (vx * np.cos(phi) + vy * np.sin(phi))
                + rolling_inertia * u[2],
                turn * u[3],
            ]
        )

    def lag_huu(q: FloatArray, u: FloatArray) -> FloatArray:
        c, s = np.cos(q[3]), np.sin(q[3])
        return np.array(
            [
                [mass, 0.0, mass * c, 0.0],
                [0.0, mass, mass * s, 0.0],
                [mass * c, mass * s, roll, 0.0],
                [0.0, 0.0, 0.0, turn],
            ]
        )

    def lag_huq(q: FloatArray, u: FloatArray) -> FloatArray:
        c, s = np.cos(q[3]), np.sin(q[3])
        vx, vy = velocity(q, u)
        huq = np.zeros((4, 4))
        huq[:, 3] = [
            -mass * s * u[2],
            mass * c * u[2],
            mass * (vy * c - vx * s),
            0.0,
        ]
        return huq

    mechanical = MechanicalSystem(
        frame=frame,
        lagrangian=lagrangian,
        dq=lag_dq,
        du=lag_du,
        hess_uu=lag_huu,
        hess_uq=lag_huq,
        name="vertical_disc_dyn",
    )
    ocp = DynamicOCP(
        frame=frame, cost=cost, mechanical=mechanical, name="vertical_disc_dyn"
    )

    def reference(state: PhaseState, forces: FloatArray) -> FloatArray:
        u3, u4 = state.u
        a3, a4 = state.a
        j3, j4 = state.j
        coupling = _disc_coupling(state.q, state.mu)
        return np.concatenate(
            [
                _disc_kinematics(state.q, u3, u4),
                [a3, a4],
                [j3, j4],
                [-coupling * u4 / roll**2, coupling * u3 / turn**2],
                [0.0, 0.0],
            ]
        )

    def mechanics_reference(state: PhaseState, forces: FloatArray) -> FloatArray:
        u3, u4 = state.u
        return np.concatenate(
            [
                _disc_kinematics(state.q, u3, u4),
                [forces[0] / roll, forces[1] / turn],
            ]
        )

    def energy(state: PhaseState) -> dict[str, FloatArray]:
        u3, u4 = state.u
        return {"energy": np.array([0.5 * (roll * u3**2 + turn * u4**2)])}

    roll_scenario = Scenario(
        name="roll",
        layout=Layout.DYNAMIC,
        bc=BoundaryConditions(
            0.0,
            1.0,
            np.zeros(4),
            np.array([1.0, 0.0, 1.0, 0.0]),
            u0_free=np.zeros(2),
            u1_free=np.zeros(2),
        ),
        description="roll one unit along x from rest to rest",
    )
    push = Scenario(
        name="push",
        layout=Layout.MECHANICS,
        bc=BoundaryConditions(0.0, 1.0, np.zeros(4), np.zeros(4), u0_free=np.zeros(2)),
        description="start at rest; apply torques with --forces",
    )
    return BuiltinModel(
        name="vertical_disc_dyn",
        frame=frame,
        coordinates=("x", "y", "theta", "phi"),
        dynamic_ocp=ocp,
        mechanical=mechanical,
        references={Layout.DYNAMIC: reference, Layout.MECHANICS: mechanics_reference},
        monitors={Layout.DYNAMIC: _multiplier_monitor, Layout.MECHANICS: energy},
        scenarios={
            "roll": roll_scenario,
            "rest": _rest(Layout.DYNAMIC, 4, 2),
            "push": push,
        },
        params=params,
        box=_DISC_BOX,
        description="vertical rolling disc with rolling and turning torques",
    )


# ---------------------------------------------------------------------------
# Falling rolling disc
# ---------------------------------------------------------------------------


def _build_falling_disc_kin(radius: float = 1.0) -> BuiltinModel:
    params = {"radius": radius}
    _positive(params)
    r = radius

    def psi(q: FloatArray) -> FloatArray:
        phi, theta = q[0], q[1]
        return np.array(
            [
                [np.sin(theta), 0.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0, 0.0],
                [np.cos(theta), 0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, r * np.cos(phi), 1.0, 0.0],
                [0.0, 0.0, r * np.sin(phi), 0.0, 1.0],
            ]
        )

    def jacobian(q: FloatArray) -> FloatArray:
        phi, theta = q[0], q[1]
        jac = np.zeros((5, 5, 5))
        jac[0, 0, 1] = np.cos(theta)
        jac[2, 0, 1] = -np.sin(theta)
        jac[3, 2, 0] = -r * np.sin(phi)
        jac[4, 2, 0] = r * np.cos(phi)
        return jac

    # u⁴ = u⁵ = 0 are the rolling constraints
    frame = QuasiFrame(
        n=5,
        m=2,
        psi=psi,
        psi_jacobian=jacobian,
        constrained=(3, 4),
        name="falling_disc",
    )
    ocp = KinematicOCP(frame=frame, cost=_speed_cost(3, 5), name="falling_disc_kin")

    def reference(state: PhaseState, forces: FloatArray) -> FloatArray:
        phi, theta = state.q[0], state.q[1]
        u1, u2, u3 = state.u
        mu4, mu5 = state.mu
        cot = np.cos(theta) / np.sin(theta)
        csc = 1.0 / np.sin(theta)
        coupling = r * (mu4 * np.sin(phi) - mu5 * np.cos(phi)) * csc
        # ẋ uses cot θ as in Φ
        return np.array(
            [
                csc * u1,
                u2,
                -cot * u1 + u3,
                r * np.cos(phi) * cot * u1 - r * np.cos(phi) * u3,
                r * np.sin(phi) * cot * u1 - r * np.sin(phi) * u3,
                u2 * u3 - u1 * u2 * cot - coupling * u3,
                u1**2 * cot - u1 * u3,
                coupling * u1,
                0.0,
                0.0,
            ]
        )

    upright = np.array([0.0, HALF_PI, 0.0, 0.0, 0.0])
    tilt = Scenario(
        name="tilt",
        layout=Layout.KINEMATIC,
        bc=BoundaryConditions(
            0.0, 1.0, upright, upright + np.array([0.0, 0.1, 0.0, 0.0, 0.0])
        ),
        description="tilt the upright disc by 0.1 rad",
    )
    roll = Scenario(
        name="roll",
        layout=Layout.KINEMATIC,
        bc=BoundaryConditions(
            0.0, 1.0, upright, upright + np.array([0.0, 0.0, 1.0, -r, 0.0])
        ),
        description="roll the upright disc through one radian",
    )
    return BuiltinModel(
        name="falling_disc_kin",
        frame=frame,
        coordinates=("phi", "theta", "psi", "x", "y"),
        kinematic_ocp=ocp,
        references={Layout.KINEMATIC: reference},
        monitors={Layout.KINEMATIC: _multiplier_monitor},
        scenarios={"tilt": tilt, "roll": roll},
        params=params,
        box=_sample_box(
            [-np.pi, CHART_MARGIN, -np.pi, -1.0, -1.0],
            [np.pi, np.pi - CHART_MARGIN, np.pi, 1.0, 1.0],
        ),
        description="falling rolling disc with body angular velocity controls",
    )


# ---------------------------------------------------------------------------
# Free rigid body and sphere
# ---------------------------------------------------------------------------


def _euler_psi(q: FloatArray) -> FloatArray:
    _, theta, phi = q
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    return np.array(
        [
            [-st, 0.0, 1.0],
            [ct * sp, cp, 0.0],
            [ct * cp, -sp, 0.0],
        ]
    )


def _euler_jacobian(q: FloatArray) -> FloatArray:
    _, theta, phi = q
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    jac = np.zeros((3, 3, 3))
    jac[0, 0, 1] = -ct
    jac[1, 0, 1] = -st * sp
    jac[1, 0, 2] = ct * cp
    jac[1, 1, 2] = -sp
    jac[2, 0, 1] = -st * cp
    jac[2, 0, 2] = -ct * sp
    jac[2, 1, 2] = -cp
    return jac


def euler_angle_rates(q: FloatArray, omega: FloatArray) -> FloatArray:
    """(ψ̇, θ̇, φ̇) from body angular velocity for Type-I Euler angles."""
    _, theta, phi = q
    sec, tan = 1.0 / np.cos(theta), np.tan(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    _, w2, w3 = omega
    return np.array(
        [
            sec * sp * w2 + sec * cp * w3,
            cp * w2 - sp * w3,
            omega[0] + tan * sp * w2 + tan * cp * w3,
        ]
    )


def angular_momentum(inertia: FloatArray, omega: FloatArray) -> FloatArray:
    """Body angular momentum Π = 𝕀ω for principal inertias."""
    return inertia * omega


def euler_torques(
    inertia: FloatArray, omega: FloatArray, alpha: FloatArray
) -> FloatArray:
    """Torques M = 𝕀ω̇ + ω × Π that produce angular acceleration *alpha*."""
    return inertia * alpha + np.cross(omega, angular_momentum(inertia, omega))


def rotational_energy(inertia: FloatArray, omega: FloatArray) -> float:
    """Kinetic energy ½ ω·𝕀ω."""
    return 0.5 * float(omega @ (inertia * omega))


def torque_rate(
    inertia: FloatArray, omega: FloatArray, alpha: FloatArray, jerk: FloatArray
) -> FloatArray:
    """Ṁ = 𝕀ȷ + a × Π + ω × 𝕀a."""
    momentum = angular_momentum(inertia, omega)
    return inertia * jerk + np.cross(alpha, momentum) + np.cross(omega, inertia * alpha)


def rigid_body_kappa(
    inertia: FloatArray, omega: FloatArray, alpha: FloatArray, jerk: FloatArray
) -> FloatArray:
    """κ = Π × M − 𝕀(ω × M) − 𝕀Ṁ for the cost ½‖M‖²."""
    momentum = angular_momentum(inertia, omega)
    torque = euler_torques(inertia, omega, alpha)
    return (
        np.cross(momentum, torque)
        - inertia * np.cross(omega, torque)
        - inertia * torque_rate(inertia, omega, alpha, jerk)
    )


def sphere_first_integral(
    omega: FloatArray, alpha: FloatArray, jerk: FloatArray
) -> FloatArray:
    """c = ω̈ − ω̇ × ω, constant along optimal sphere motions."""
    return jerk - np.cross(alpha, omega)


def _torque_cost(inertia: FloatArray) -> CostDynamic:
    """C = ½‖M‖² with M the Euler torque, analytic partials throughout."""
    inertia_m = np.diag(inertia)

    def omega_jacobian(u: FloatArray) -> FloatArray:
        # ∂M/∂ω
        return skew(u) @ inertia_m - skew(inertia * u)

    def c(q: FloatArray, u: FloatArray, a: FloatArray) -> float:
        torque = euler_torques(inertia, u, a)
        return 0.5 * float(torque @ torque)

    def du(q: FloatArray, u: FloatArray, a: FloatArray) -> FloatArray:
        return omega_jacobian(u).T @ euler_torques(inertia, u, a)

    def da(q: FloatArray, u: FloatArray, a: FloatArray) -> FloatArray:
        return inertia * euler_torques(inertia, u, a)

    def kappa_grad(
        q: FloatArray, u: FloatArray, a: FloatArray, j: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        momentum = inertia * u
        torque = euler_torques(inertia, u, a)
        m_omega = omega_jacobian(u)
        d_omega = (
            -skew(torque) @ inertia_m
            + skew(momentum) @ m_omega
            - inertia_m @ (-skew(torque) + skew(u) @ m_omega)
            - inertia_m @ (skew(a) @ inertia_m - skew(inertia * a))
        )
        d_alpha = (
            skew(momentum) @ inertia_m
            - inertia_m @ skew(u) @ inertia_m
            - inertia_m @ m_omega
        )
        return np.zeros((3, 3)), d_omega, d_alpha

    return CostDynamic(
        c=c,
        dq=lambda q, u, a: np.zeros(3),
        du=du,
        da=da,
        hess_aa=lambda q, u, a: inertia_m @ inertia_m,
        hess_au=lambda q, u, a: inertia_m @ omega_jacobian(u),
        hess_aq=lambda q, u, a: np.zeros((3, 3)),
        kappa_grad=kappa_grad,
    )


def _body_mechanics(
    frame: QuasiFrame, inertia: FloatArray, name: str
) -> MechanicalSystem:
    return MechanicalSystem(
        frame=frame,
        lagrangian=lambda q, u: rotational_energy(inertia, u),
        dq=lambda q, u: np.zeros(3),
        du=lambda q, u: inertia * u,
        hess_uu=lambda q, u: np.diag(inertia),
        hess_uq=lambda q, u: np.zeros((3, 3)),
        name=name,
    )


def _euler_reference(inertia: FloatArray) -> ReferenceRhs:
    def reference(state: PhaseState, forces: FloatArray) -> FloatArray:
        omega = state.u
        # Euler equations: 𝕀ω̇ + ω × Π = M
        alpha = (forces - np.cross(omega, inertia * omega)) / inertia
        return np.concatenate([euler_angle_rates(state.q, omega), alpha])

    return reference


def _body_monitor(inertia: FloatArray) -> Monitor:
    def monitor(state: PhaseState) -> dict[str, FloatArray]:
        omega = state.u
        momentum = angular_momentum(inertia, omega)
        return {
            "energy": np.array([rotational_energy(inertia, omega)]),
            "momentum_sq": np.array([momentum @ momentum]),
        }

    return monitor


_EULER_BOX = _sample_box(
    [-np.pi, -HALF_PI + CHART_MARGIN, -np.pi],
    [np.pi, HALF_PI - CHART_MARGIN, np.pi],
)
_REORIENT_TARGET = np.array([np.pi, -np.pi / 4.0, np.pi / 5.0])


def _reorient(name: str, description: str) -> Scenario:
    return Scenario(
        name=name,
        layout=Layout.DYNAMIC,
        bc=BoundaryConditions(
            0.0,
            1.0,
            np.zeros(3),
            _REORIENT_TARGET,
            u0_free=np.zeros(3),
            u1_free=np.zeros(3),
        ),
        steps=400,
        description=description,
    )


def _spin(u0: FloatArray, t1: float, steps: int, description: str) -> Scenario:
    return Scenario(
        name="spin",
        layout=Layout.MECHANICS,
        bc=BoundaryConditions(0.0, t1, np.zeros(3), np.zeros(3), u0_free=u0),
        steps=steps,
        description=description,
    )


def _euler_frame(name: str) -> QuasiFrame:
    return QuasiFrame(
        n=3, m=0, psi=_euler_psi, psi_jacobian=_euler_jacobian, name=name
    )


def _build_rigid_body_dyn(
    I_xx: float = 1.0, I_yy: float = 2.0, I_zz: float = 3.0
) -> BuiltinModel:
    params = {"I_xx": I_xx, "I_yy": I_yy, "I_zz": I_zz}
    _positive(params)
    inertia = np.array([I_xx, I_yy, I_zz])
    frame = _euler_frame("rigid_body")
    mechanical = _body_mechanics(frame, inertia, "rigid_body_dyn")
    ocp = DynamicOCP(
        frame=frame,
        cost=_torque_cost(inertia),
        mechanical=mechanical,
        name="rigid_body_dyn",
    )

    def reference(state: PhaseState, forces: FloatArray) -> FloatArray:
        omega, alpha, jerk = state.u, state.a, state.j
        momentum = inertia * omega
        torque = euler_torques(inertia, omega, alpha)
        torque_dot = torque_rate(inertia, omega, alpha, jerk)
        kappa = rigid_body_kappa(inertia, omega, alpha, jerk)
        # κ̇ = κ × ω solved for M̈, then for ȷ̇
        torque_ddot = (
            np.cross(inertia * alpha, torque)
            + np.cross(momentum, torque_dot)
            - inertia * (np.cross(alpha, torque) + np.cross(omega, torque_dot))
            - np.cross(kappa, omega)
        ) / inertia
        jerk_dot = (
            torque_ddot
            - np.cross(jerk, momentum)
            - 2.0 * np.cross(alpha, inertia * alpha)
            - np.cross(omega, inertia * jerk)
        ) / inertia
        return np.concatenate(
            [euler_angle_rates(state.q, omega), alpha, jerk, jerk_dot]
        )

    def kappa_monitor(state: PhaseState) -> dict[str, FloatArray]:
        kappa = rigid_body_kappa(inertia, state.u, state.a, state.j)
        return {"kappa_sq": np.array([kappa @ kappa])}

    derived = {
        "eta_32": I_zz - I_yy,
        "eta_13": I_xx - I_zz,
        "eta_21": I_yy - I_xx,
    }
    return BuiltinModel(
        name="rigid_body_dyn",
        frame=frame,
        coordinates=("psi", "theta", "phi"),
        dynamic_ocp=ocp,
        mechanical=mechanical,
        references={
            Layout.DYNAMIC: reference,
            Layout.MECHANICS: _euler_reference(inertia),
        },
        monitors={
            Layout.DYNAMIC: kappa_monitor,
            Layout.MECHANICS: _body_monitor(inertia),
        },
        scenarios={
            "reorient": _reorient(
                "reorient", "rest-to-rest reorientation to (π, -π/4, π/5)"
            ),
            "rest": _rest(Layout.DYNAMIC, 3, 3),
            "spin": _spin(
                np.array([0.05, 0.05, 1.0]),
                10.0,
                2000,
                "torque-free spin near the major axis",
            ),
        },
        params=params | derived,
        box=_EULER_BOX,
        description="free rigid body with body-axis control torques",
    )


def _build_sphere_dyn(inertia: float = 1.0) -> BuiltinModel:
    params = {"inertia": inertia}
    _positive(params)
    inertias = np.full(3, inertia)
    weight = inertia**2
    frame = _euler_frame("sphere")
    mechanical = _body_mechanics(frame, inertias, "sphere_dyn")
    cost = CostDynamic(
        c=lambda q, u, a: 0.5 * weight * float(a @ a),
        dq=lambda q, u, a: np.zeros(3),
        du=lambda q, u, a: np.zeros(3),
        da=lambda q, u, a: weight * np.asarray(a, dtype=float),
        hess_aa=lambda q, u, a: weight * np.eye(3),
        hess_au=lambda q, u, a: np.zeros((3, 3)),
        hess_aq=lambda q, u, a: np.zeros((3, 3)),
        kappa_grad=lambda q, u, a, j: (
            np.zeros((3, 3)),
            np.zeros((3, 3)),
            np.zeros((3, 3)),
        ),
    )
    ocp = DynamicOCP(frame=frame, cost=cost, mechanical=mechanical, name="sphere_dyn")

    def reference(state: PhaseState, forces: FloatArray) -> FloatArray:
        omega, alpha, jerk = state.u, state.a, state.j
        return np.concatenate(
            [
                euler_angle_rates(state.q, omega),
                alpha,
                jerk,
                np.cross(jerk, omega),
            ]
        )

    def first_integral(state: PhaseState) -> dict[str, FloatArray]:
        return {"sphere_c": sphere_first_integral(state.u, state.a, state.j)}

    return BuiltinModel(
        name="sphere_dyn",
        frame=frame,
        coordinates=("psi", "theta", "phi"),
        dynamic_ocp=ocp,
        mechanical=mechanical,
        references={
            Layout.DYNAMIC: reference,
            Layout.MECHANICS: _euler_reference(inertias),
        },
        monitors={
            Layout.DYNAMIC: first_integral,
            Layout.MECHANICS: _body_monitor(inertias),
        },
        scenarios={
            "fig2": _reorient(
                "fig2", "rest-to-rest reorientation of the sphere to (π, -π/4, π/5)"
            ),
            "rest": _rest(Layout.DYNAMIC, 3, 3),
            "spin": _spin(
                np.array([0.0, 0.0, 1.0]), 10.0, 2000, "torque-free spin about z"
            ),
        },
        aliases={"turn": "fig2"},
        params=params,
        box=_EULER_BOX,
        description="free rigid sphere with body-axis control torques",
    )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_BUILDERS: dict[str, Callable[..., BuiltinModel]] = {
    "heisenberg": _build_heisenberg,
    "vertical_disc_kin": _build_vertical_disc_kin,
    "vertical_disc_dyn": _build_vertical_disc_dyn,
    "falling_disc_kin": _build_falling_disc_kin,
    "rigid_body_dyn": _build_rigid_body_dyn,
    "sphere_dyn": _build_sphere_dyn,
}

MODEL_NAMES: tuple[str, ...] = tuple(_BUILDERS)


def builtin(name: str, **params: float) -> BuiltinModel:
    """Build a registered model.

    Args:
        name: One of :data:`MODEL_NAMES`.
        **params: Overrides of the model constants, e.g. ``radius=2.0``.

    Raises:
        UnknownModel: If *name* is not registered.
        ConfigError: If a parameter is unknown or not positive.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownModel(name, MODEL_NAMES) from None
    valid = tuple(inspect.signature(builder).parameters)
    unknown = sorted(set(params) - set(valid))
    if unknown:
        raise ConfigError(
            f"model '{name}' accepts parameters {', '.join(valid) or '(none)'}; "
            f"got {', '.join(unknown)}"
        )
    model = builder(**{key: float(value) for key, value in params.items()})
    logger.debug("Built model %s with params %s", name, dict(model.params))
    return model


def reference_rhs(
    model: BuiltinModel,
    layout: Layout,
    state: PhaseState,
    forces: FloatArray | None = None,
) -> FloatArray:
    """Evaluate the model's hand-written right-hand side.

    Args:
        model: Built-in model.
        layout: Requested layout; must match ``state.layout``.
        state: Phase state.
        forces: Free generalized forces; only used by the mechanics layout.

    Raises:
        UnsupportedLayout: If the model has no reference for *layout*.
    """
    if state.layout is not layout:
        raise UnsupportedLayout(
            f"state has layout {state.layout.value}, requested {layout.value}"
        )
    try:
        reference = model.references[layout]
    except KeyError:
        raise UnsupportedLayout(
            f"model '{model.name}' has no {layout.value} reference equations"
        ) from None
    force = np.zeros(model.frame.k) if forces is None else np.asarray(forces, float)
    return np.asarray(reference(state, force), dtype=float)


def first_integrals(
    model: BuiltinModel, state: PhaseState
) -> dict[str, FloatArray]:
    """Model quantities conserved along force-free flows of ``state.layout``."""
    monitor = model.monitors.get(state.layout)
    return {} if monitor is None else monitor(state)
