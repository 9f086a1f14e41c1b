"""Tests for ``hamel_oc.assembly``."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hamel_oc.assembly import (
    dynamic_rhs,
    kappa,
    kappa_jacobians,
    kinematic_rhs,
    layout_of,
    mechanics_rhs,
    recover_controls,
    rhs_function,
)
from hamel_oc.errors import SingularMass, UnsupportedLayout
from hamel_oc.frames import evaluate, identity_frame
from hamel_oc.models import builtin, euler_torques, reference_rhs
from hamel_oc.phase import Layout, PhaseState
from hamel_oc.problems import CostKinematic, KinematicOCP
from hamel_oc.solvers import integrate


class TestKinematicRhs:
    """Tests for ``kinematic_rhs``."""

    def test_heisenberg_state(self) -> None:
        """u̇₂ = -2μu₃, u̇₃ = 2μu₂, μ̇ = 0 and ż = y u₂ - x u₃."""
        ocp = builtin("heisenberg").kinematic_ocp
        state = PhaseState.pack(
            Layout.KINEMATIC, 3, 1, q=[0.5, -0.25, 2.0], u=[1.0, 3.0], mu=[0.75]
        )
        rhs = kinematic_rhs(ocp, state)

        assert_allclose(rhs, [1.0, 3.0, -0.25 - 1.5, -4.5, 1.5, 0.0], atol=1e-14)

    def test_singular_control_hessian(self) -> None:
        """A cost flat in u has no explicit u̇."""
        ocp = KinematicOCP(
            frame=identity_frame(2), cost=CostKinematic(c=lambda q, u: 0.0)
        )
        state = PhaseState.pack(Layout.KINEMATIC, 2, 0, q=[0.0, 0.0], u=[1.0, 0.0])

        with pytest.raises(SingularMass, match="hess_uu"):
            kinematic_rhs(ocp, state)

    def test_layout_mismatch(self) -> None:
        """A dynamic state is refused."""
        ocp = builtin("heisenberg").kinematic_ocp
        state = PhaseState.pack(Layout.DYNAMIC, 3, 1, q=np.zeros(3))

        with pytest.raises(UnsupportedLayout):
            kinematic_rhs(ocp, state)


class TestDynamicRhs:
    """Tests for ``dynamic_rhs`` and the κ-vector."""

    def test_sphere_kappa_is_minus_jerk(self) -> None:
        """With C = ½‖a‖² and unit inertia, κ = -ȷ."""
        ocp = builtin("sphere_dyn").dynamic_ocp
        j = np.array([0.3, -1.0, 2.0])
        value = kappa(ocp, np.zeros(3), np.array([1.0, 0.0, 0.0]), np.ones(3), j)

        assert_allclose(value, -j, atol=1e-14)

    def test_sphere_jerk_rate(self) -> None:
        """ȷ̇ = ȷ × ω for the sphere."""
        ocp = builtin("sphere_dyn").dynamic_ocp
        omega = np.array([0.2, -0.4, 1.0])
        jerk = np.array([1.0, 0.5, -0.3])
        state = PhaseState.pack(
            Layout.DYNAMIC, 3, 0, q=[0.1, 0.2, 0.3], u=omega, a=[0.0, 1.0, 0.0], j=jerk
        )

        assert_allclose(dynamic_rhs(ocp, state)[9:], np.cross(jerk, omega), atol=1e-12)

    def test_analytic_kappa_jacobians_match_differences(self) -> None:
        """The rigid body's analytic ∂κ agrees with central differences."""
        ocp = builtin("rigid_body_dyn").dynamic_ocp
        plain = dataclasses.replace(
            ocp, cost=dataclasses.replace(ocp.cost, kappa_grad=None)
        )
        q = np.array([0.3, 0.4, -0.2])
        u, a, j = np.array([0.5, -1.0, 0.8]), np.array([0.1, 0.7, -0.4]), np.ones(3)

        for analytic, differenced in zip(
            kappa_jacobians(ocp, q, u, a, j), kappa_jacobians(plain, q, u, a, j)
        ):
            assert_allclose(analytic, differenced, atol=1e-6)

    def test_rigid_body_kappa_rotates_with_body(self) -> None:
        """κ̇ = κ × ω at random rigid-body states to 1e-8."""
        ocp = builtin("rigid_body_dyn").dynamic_ocp
        rng = np.random.default_rng(11)
        for _ in range(20):
            state = PhaseState(Layout.DYNAMIC, 3, 0, rng.uniform(-1.0, 1.0, 12))
            q, u, a, j = state.q, state.u, state.a, state.j
            rate = PhaseState(Layout.DYNAMIC, 3, 0, dynamic_rhs(ocp, state))
            kq, ku, ka = kappa_jacobians(ocp, q, u, a, j)
            hess_aa = ocp.cost.partials(q, u, a).hess_aa
            kappa_rate = kq @ rate.q + ku @ a + ka @ j - hess_aa @ rate.j

            assert_allclose(
                kappa_rate, np.cross(kappa(ocp, q, u, a, j), u), atol=1e-8
            )

    def test_kappa_chain_rule_matches_differences(self) -> None:
        """d/dt ∂C/∂a by differences along a flow equals the chain-rule term."""
        ocp = builtin("rigid_body_dyn").dynamic_ocp
        start = PhaseState.pack(
            Layout.DYNAMIC,
            3,
            0,
            q=[0.1, -0.2, 0.3],
            u=[0.5, -0.3, 0.2],
            a=[0.4, 0.1, -0.6],
            j=[-0.2, 0.3, 0.1],
        )
        trajectory = integrate(rhs_function(ocp), start, 0.0, 1.0, 400)
        h = trajectory.t[1] - trajectory.t[0]
        phases = [trajectory.state(i) for i in range(trajectory.t.size)]
        da = np.array([ocp.cost.partials(s.q, s.u, s.a).da for s in phases])
        differenced = (-da[4:] + 8.0 * da[3:-1] - 8.0 * da[1:-3] + da[:-4]) / (12 * h)

        for state, slope in zip(phases[2:-2], differenced):
            data = ocp.cost.partials(state.q, state.u, state.a)
            qdot = evaluate(ocp.frame, state.q).phi @ state.u
            chain = (
                data.hess_aa @ state.j
                + data.hess_au @ state.a
                + data.hess_aq @ qdot
            )
            assert_allclose(chain, slope, atol=1e-5)
            assert_allclose(
                data.du - chain,
                kappa(ocp, state.q, state.u, state.a, state.j),
                atol=1e-12,
            )

    def test_vertical_disc_matches_reference(self) -> None:
        """The twelve-equation vertical disc system at one state."""
        model = builtin("vertical_disc_dyn")
        state = PhaseState(
            Layout.DYNAMIC,
            4,
            2,
            np.array([0.1, 0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9, 1.0, 1.1, -1.2]),
        )
        assembled = dynamic_rhs(model.dynamic_ocp, state)

        assert_allclose(
            assembled, reference_rhs(model, Layout.DYNAMIC, state), atol=1e-10
        )


class TestMechanicsRhs:
    """Tests for ``mechanics_rhs`` and ``recover_controls``."""

    def test_rolling_torque(self) -> None:
        """w₃ = 1, w₄ = 0 gives θ̈ = 2/3 with m = 1, I = ½."""
        system = builtin("vertical_disc_dyn").mechanical
        state = PhaseState.pack(Layout.MECHANICS, 4, 2, q=np.zeros(4), u=[0.0, 0.0])
        rhs = mechanics_rhs(system, np.array([1.0, 0.0]), state)

        assert_allclose(rhs[4:], [2.0 / 3.0, 0.0], atol=1e-14)

    def test_euler_equations(self) -> None:
        """Rigid-body mechanics reproduces 𝕀ω̇ + ω × 𝕀ω = M."""
        model = builtin("rigid_body_dyn")
        inertia = np.array([1.0, 2.0, 3.0])
        omega = np.array([0.4, -0.7, 1.2])
        torque = np.array([0.5, 0.25, -1.0])
        state = PhaseState.pack(Layout.MECHANICS, 3, 0, q=[0.1, 0.2, 0.3], u=omega)
        alpha = mechanics_rhs(model.mechanical, torque, state)[3:]

        assert_allclose(euler_torques(inertia, omega, alpha), torque, atol=1e-10)

    def test_recover_controls_inverts_dynamics(self) -> None:
        """Recovered controls equal the forces that produced the motion."""
        system = builtin("vertical_disc_dyn").mechanical
        forces = np.array([0.3, -1.7])
        state = PhaseState.pack(
            Layout.MECHANICS, 4, 2, q=[0.5, -0.5, 1.0, 0.7], u=[1.5, -0.4]
        )
        derivative = mechanics_rhs(system, forces, state)

        assert_allclose(recover_controls(system, state, derivative), forces, atol=1e-12)

    def test_time_dependent_forces(self) -> None:
        """Callable forces are evaluated at the requested time."""
        system = builtin("sphere_dyn").mechanical
        state = PhaseState.pack(Layout.MECHANICS, 3, 0, q=np.zeros(3), u=np.zeros(3))
        rhs = mechanics_rhs(system, lambda t: np.array([t, 0.0, 0.0]), state, t=2.0)

        assert_allclose(rhs[3:], [2.0, 0.0, 0.0])

    def test_wrong_force_length(self) -> None:
        """Force vectors must have one entry per free slot."""
        system = builtin("sphere_dyn").mechanical
        state = PhaseState.pack(Layout.MECHANICS, 3, 0, q=np.zeros(3))

        with pytest.raises(ValueError, match="expected 3"):
            mechanics_rhs(system, np.zeros(2), state)


class TestRhsFunction:
    """Tests for ``rhs_function`` and ``layout_of``."""

    def test_wraps_flat_vectors(self) -> None:
        """The closure agrees with the direct call."""
        ocp = builtin("heisenberg").kinematic_ocp
        y = np.array([0.1, 0.2, 0.3, 1.0, -1.0, 0.5])
        direct = kinematic_rhs(ocp, PhaseState(Layout.KINEMATIC, 3, 1, y))

        assert_allclose(rhs_function(ocp)(0.0, y), direct)

    @pytest.mark.parametrize(
        ("name", "attribute", "layout"),
        [
            ("heisenberg", "kinematic_ocp", Layout.KINEMATIC),
            ("sphere_dyn", "dynamic_ocp", Layout.DYNAMIC),
            ("sphere_dyn", "mechanical", Layout.MECHANICS),
        ],
    )
    def test_layout_of(self, name: str, attribute: str, layout: Layout) -> None:
        """Each problem kind maps to its layout."""
        assert layout_of(getattr(builtin(name), attribute)) is layout

    def test_rejects_other_objects(self) -> None:
        """Only problems and mechanical systems can be assembled."""
        with pytest.raises(TypeError, match="cannot assemble"):
            rhs_function(object())
