"""Tests for ``hamel_oc.problems``."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hamel_oc.errors import InvalidProblem
from hamel_oc.frames import identity_frame
from hamel_oc.models import builtin
from hamel_oc.phase import Layout
from hamel_oc.problems import (
    BoundaryConditions,
    CostDynamic,
    CostKinematic,
    DynamicOCP,
    KinematicOCP,
    MechanicalSystem,
    fd_partials,
    validate,
)

Q = np.array([0.4, -0.2, 0.7])
U = np.array([0.3, -0.5])
A = np.array([1.2, 0.1])


def _kinematic_cost() -> CostKinematic:
    """C = ½(1 + q₁²)‖u‖², no partials supplied."""
    return CostKinematic(c=lambda q, u: 0.5 * (1.0 + q[0] ** 2) * float(u @ u))


def _dynamic_cost() -> CostDynamic:
    """C = ½‖a‖² + q₁ a·u, no partials supplied."""
    return CostDynamic(
        c=lambda q, u, a: 0.5 * float(a @ a) + q[0] * float(a @ u)
    )


class TestCostKinematic:
    """Tests for differenced kinematic cost partials."""

    def test_matches_hand_derivatives(self) -> None:
        """Differenced partials agree with the analytic ones."""
        data = _kinematic_cost().partials(Q, U)
        scale = 1.0 + Q[0] ** 2
        expected_uq = np.zeros((2, 3))
        expected_uq[:, 0] = 2.0 * Q[0] * U

        assert data.value == pytest.approx(0.5 * scale * float(U @ U))
        assert_allclose(data.dq, [Q[0] * float(U @ U), 0.0, 0.0], atol=1e-8)
        assert_allclose(data.du, scale * U, atol=1e-8)
        assert_allclose(data.hess_uu, scale * np.eye(2), atol=1e-6)
        assert_allclose(data.hess_uq, expected_uq, atol=1e-6)

    def test_supplied_partials_win(self) -> None:
        """A supplied derivative is returned untouched."""
        cost = CostKinematic(
            c=lambda q, u: 0.0, hess_uu=lambda q, u: np.full((2, 2), 7.0)
        )

        assert_allclose(cost.partials(Q, U).hess_uu, 7.0)


class TestCostDynamic:
    """Tests for differenced dynamic cost partials."""

    def test_matches_hand_derivatives(self) -> None:
        """∂C/∂a = a + q₁u, ∂²C/∂a∂u = q₁ I, ∂²C/∂a∂q has one column u."""
        data = fd_partials(_dynamic_cost(), Q, U, A)
        expected_aq = np.zeros((2, 3))
        expected_aq[:, 0] = U

        assert_allclose(data.da, A + Q[0] * U, atol=1e-8)
        assert_allclose(data.du, Q[0] * A, atol=1e-8)
        assert_allclose(data.hess_aa, np.eye(2), atol=1e-6)
        assert_allclose(data.hess_au, Q[0] * np.eye(2), atol=1e-6)
        assert_allclose(data.hess_aq, expected_aq, atol=1e-6)

    def test_dynamic_needs_acceleration(self) -> None:
        """``fd_partials`` refuses a dynamic cost without a."""
        with pytest.raises(ValueError, match="quasi-accelerations"):
            fd_partials(_dynamic_cost(), Q, U)


class TestMechanicalSystem:
    """Tests for ``MechanicalSystem``."""

    def test_differenced_partials(self) -> None:
        """A Lagrangian without partials is differenced in full n-vectors."""
        system = MechanicalSystem(
            frame=identity_frame(2),
            lagrangian=lambda q, u: 0.5 * float(u @ u) - q[0] ** 2,
        )
        data = system.partials(np.array([0.5, 0.0]), np.array([1.0, 2.0]))

        assert_allclose(data.dq, [-1.0, 0.0], atol=1e-8)
        assert_allclose(data.du, [1.0, 2.0], atol=1e-8)
        assert_allclose(data.hess_uu, np.eye(2), atol=1e-6)

    def test_generalized_forces(self) -> None:
        """Q_I = Φʲ_I F_j on the free slots of the vertical disc."""
        mechanical = builtin("vertical_disc_dyn").mechanical
        phi = 0.6
        force = np.array([1.0, 2.0, 3.0, 4.0])
        q = np.array([0.0, 0.0, 0.0, phi])

        assert_allclose(
            mechanical.generalized_forces(q, force),
            [np.cos(phi) + 2.0 * np.sin(phi) + 3.0, 4.0],
        )


class TestValidate:
    """Tests for ``validate``."""

    def test_builtin_scenario_is_valid(self) -> None:
        """A shipped scenario passes with a positive Hessian eigenvalue."""
        model = builtin("sphere_dyn")
        report = validate(model.problem(Layout.DYNAMIC), model.scenario("fig2").bc)

        assert not report
        assert report.hessian_min_eigenvalue == pytest.approx(1.0)
        assert set(report.conditions) == {"q0", "q1"}

    def test_missing_bc(self) -> None:
        """A problem without boundary data is rejected."""
        ocp = KinematicOCP(frame=identity_frame(2), cost=_kinematic_cost())

        with pytest.raises(InvalidProblem, match="bc required"):
            validate(ocp)

    def test_lists_every_issue(self) -> None:
        """Wrong lengths, reversed horizon and stray rates are all reported."""
        ocp = KinematicOCP(frame=identity_frame(3, m=1), cost=_kinematic_cost())
        bc = BoundaryConditions(
            t0=1.0, t1=0.0, q0=np.zeros(2), q1=np.zeros(3), u0_free=np.zeros(2)
        )

        with pytest.raises(InvalidProblem) as info:
            validate(ocp, bc)
        issues = info.value.issues
        assert any(issue.startswith("t1") for issue in issues)
        assert "q0 length 2, expected 3" in issues
        assert "u0_free not used by kinematic problems" in issues

    def test_dynamic_needs_endpoint_rates(self) -> None:
        """Dynamic problems require u0_free and u1_free."""
        model = builtin("sphere_dyn")
        bc = BoundaryConditions(0.0, 1.0, np.zeros(3), np.ones(3))

        with pytest.raises(InvalidProblem) as info:
            validate(model.problem(Layout.DYNAMIC), bc)
        assert "u0_free required" in info.value.issues
        assert "u1_free required" in info.value.issues

    def test_indefinite_hessian(self) -> None:
        """A cost concave in the controls is rejected."""
        ocp = DynamicOCP(
            frame=identity_frame(2),
            cost=CostDynamic(c=lambda q, u, a: -0.5 * float(a @ a)),
        )
        bc = BoundaryConditions(
            0.0, 1.0, np.zeros(2), np.ones(2), np.zeros(2), np.zeros(2)
        )

        with pytest.raises(InvalidProblem, match="hess_aa not positive definite"):
            validate(ocp, bc)

    def test_singular_endpoint(self) -> None:
        """An endpoint outside the chart is reported by name."""
        model = builtin("falling_disc_kin")
        bc = BoundaryConditions(0.0, 1.0, np.zeros(5), np.zeros(5))

        with pytest.raises(InvalidProblem, match="q0: quasi-velocity frame singular"):
            validate(model.problem(Layout.KINEMATIC), bc)


class TestBoundaryConditions:
    """Tests for ``BoundaryConditions``."""

    def test_duration_and_arrays(self) -> None:
        """Lists are converted to float arrays."""
        bc = BoundaryConditions(0.5, 2.0, [0, 1], [1, 2], u0_free=[0])

        assert bc.duration == pytest.approx(1.5)
        assert bc.q0.dtype == np.float64
        assert bc.u0_free.dtype == np.float64
