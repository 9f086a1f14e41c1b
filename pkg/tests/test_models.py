"""Tests for ``hamel_oc.models``."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hamel_oc.errors import ConfigError, UnknownModel, UnsupportedLayout
from hamel_oc.models import (
    MODEL_NAMES,
    angular_momentum,
    builtin,
    euler_torques,
    first_integrals,
    reference_rhs,
    rigid_body_kappa,
    rotational_energy,
    skew,
)
from hamel_oc.phase import Layout, PhaseState
from hamel_oc.solvers import simulate


class TestRegistry:
    """Tests for ``builtin`` and the model registry."""

    def test_names(self) -> None:
        """All six systems are registered."""
        assert set(MODEL_NAMES) == {
            "heisenberg",
            "vertical_disc_kin",
            "vertical_disc_dyn",
            "falling_disc_kin",
            "rigid_body_dyn",
            "sphere_dyn",
        }

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_every_model_builds(self, name: str) -> None:
        """Each model exposes a frame, a layout and at least one scenario."""
        model = builtin(name)

        assert model.name == name
        assert model.layouts
        assert model.scenarios
        assert len(model.coordinates) == model.frame.n

    def test_unknown_model(self) -> None:
        """An unregistered name lists the valid ones."""
        with pytest.raises(UnknownModel, match="heisenberg") as info:
            builtin("unicycle")
        assert info.value.valid == list(MODEL_NAMES)

    def test_unknown_parameter(self) -> None:
        """Parameters outside the builder's signature are refused."""
        with pytest.raises(ConfigError, match="accepts parameters radius"):
            builtin("falling_disc_kin", mass=2.0)

    def test_non_positive_parameter(self) -> None:
        """Physical constants must be positive."""
        with pytest.raises(ConfigError, match="radius: must be positive"):
            builtin("falling_disc_kin", radius=0.0)

    def test_rigid_body_derived_constants(self) -> None:
        """η₃₂, η₁₃ and η₂₁ are stored with the inertias."""
        params = builtin("rigid_body_dyn", I_xx=1.0, I_yy=2.0, I_zz=4.0).params

        assert params["eta_32"] == pytest.approx(2.0)
        assert params["eta_13"] == pytest.approx(-3.0)
        assert params["eta_21"] == pytest.approx(1.0)

    def test_unsupported_layout(self) -> None:
        """The Heisenberg system has no dynamic problem."""
        with pytest.raises(UnsupportedLayout, match="dynamicOC"):
            builtin("heisenberg").problem(Layout.DYNAMIC)

    def test_unknown_scenario(self) -> None:
        """Scenario lookup names the valid choices."""
        with pytest.raises(ConfigError, match="valid: steer_z, rest"):
            builtin("heisenberg").scenario("loop")

    def test_scenario_alias(self) -> None:
        """``turn`` resolves to the registered ``fig2`` reorientation."""
        model = builtin("sphere_dyn")

        assert model.scenario("turn") is model.scenario("fig2")
        assert model.scenario("fig2").name == "fig2"
        with pytest.raises(ConfigError, match="valid: fig2, rest, spin, turn"):
            model.scenario("flip")


class TestRigidBodyHelpers:
    """Tests for the Euler-equation helpers."""

    def test_skew(self) -> None:
        """``skew(v) @ w`` is the cross product."""
        v, w = np.array([1.0, 2.0, 3.0]), np.array([-0.5, 0.4, 2.0])

        assert_allclose(skew(v) @ w, np.cross(v, w))

    def test_euler_torques(self) -> None:
        """M = 𝕀α + ω × 𝕀ω."""
        inertia = np.array([1.0, 2.0, 3.0])
        omega = np.array([1.0, 0.0, 1.0])

        assert_allclose(
            euler_torques(inertia, omega, np.zeros(3)), np.cross(omega, inertia * omega)
        )
        assert_allclose(
            euler_torques(inertia, np.zeros(3), np.ones(3)), inertia
        )

    def test_sphere_kappa_is_minus_jerk(self) -> None:
        """Unit inertias reduce κ to -ȷ."""
        omega = np.array([0.3, -0.2, 1.0])
        alpha = np.array([1.0, 0.5, 0.0])
        jerk = np.array([-0.4, 0.7, 0.2])

        assert_allclose(rigid_body_kappa(np.ones(3), omega, alpha, jerk), -jerk)

    def test_energy_and_momentum(self) -> None:
        """T = ½ ω·𝕀ω and Π = 𝕀ω."""
        inertia = np.array([1.0, 2.0, 3.0])
        omega = np.array([1.0, 1.0, 1.0])

        assert rotational_energy(inertia, omega) == pytest.approx(3.0)
        assert_allclose(angular_momentum(inertia, omega), inertia)


class TestReferences:
    """Tests for ``reference_rhs`` and ``first_integrals``."""

    def test_heisenberg_reference(self) -> None:
        """The hand-written Heisenberg equations at one state."""
        model = builtin("heisenberg")
        state = PhaseState.pack(
            Layout.KINEMATIC, 3, 1, q=[0.5, -0.25, 2.0], u=[1.0, 3.0], mu=[0.75]
        )

        assert_allclose(
            reference_rhs(model, Layout.KINEMATIC, state),
            [1.0, 3.0, -1.75, -4.5, 1.5, 0.0],
        )

    def test_layout_mismatch(self) -> None:
        """The requested layout must match the state's."""
        model = builtin("heisenberg")
        state = PhaseState.pack(Layout.KINEMATIC, 3, 1, q=np.zeros(3))

        with pytest.raises(UnsupportedLayout, match="requested dynamicOC"):
            reference_rhs(model, Layout.DYNAMIC, state)

    def test_missing_reference(self) -> None:
        """A layout without reference equations is reported."""
        model = builtin("heisenberg")
        state = PhaseState.pack(Layout.MECHANICS, 3, 1, q=np.zeros(3))

        with pytest.raises(UnsupportedLayout, match="no mechanics reference"):
            reference_rhs(model, Layout.MECHANICS, state)

    def test_heisenberg_integrals(self) -> None:
        """The Heisenberg monitor reports μ and ‖u‖²."""
        model = builtin("heisenberg")
        state = PhaseState.pack(
            Layout.KINEMATIC, 3, 1, q=np.zeros(3), u=[3.0, 4.0], mu=[0.5]
        )
        values = first_integrals(model, state)

        assert_allclose(values["mu"], [0.5])
        assert_allclose(values["speed_sq"], [25.0])

    def test_no_monitor_is_empty(self) -> None:
        """Layouts without conserved quantities return nothing."""
        model = builtin("falling_disc_kin")
        state = PhaseState.pack(Layout.DYNAMIC, 5, 2, q=np.zeros(5))

        assert first_integrals(model, state) == {}


class TestForceFreeMotion:
    """Tests of force-free rigid body motion."""

    def test_spin_conserves_energy_and_momentum(self) -> None:
        """The shipped spin keeps T and ‖Π‖² to 1e-8."""
        model = builtin("rigid_body_dyn")
        scenario = model.scenario("spin")
        bc = scenario.bc
        trajectory = simulate(
            model.mechanical, None, bc.q0, bc.u0_free, bc.t0, bc.t1, scenario.steps
        )
        start = first_integrals(model, trajectory.initial)
        end = first_integrals(model, trajectory.final)

        assert_allclose(end["energy"], start["energy"], atol=1e-8)
        assert_allclose(end["momentum_sq"], start["momentum_sq"], atol=1e-8)

    def test_major_axis_is_stable(self) -> None:
        """A spin near the largest inertia axis stays near it."""
        model = builtin("rigid_body_dyn")
        trajectory = simulate(
            model.mechanical,
            None,
            np.zeros(3),
            np.array([1e-4, 1e-4, 1.0]),
            0.0,
            8.0,
            1600,
        )

        assert np.max(np.abs(trajectory.block("u")[:, :2])) <= 1e-3
