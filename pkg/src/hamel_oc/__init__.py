"""hamel_oc: Boltzmann-Hamel equations for nonholonomic mechanics and control."""

from hamel_oc.assembly import (
    dynamic_rhs,
    kappa,
    kinematic_rhs,
    mechanics_rhs,
    recover_controls,
    rhs_function,
)
from hamel_oc.errors import (
    ConfigError,
    HamelError,
    InvalidProblem,
    NoConvergence,
    SingularFrame,
    SingularJacobian,
    SingularMass,
    UnknownModel,
    UnsupportedLayout,
)
from hamel_oc.frames import QuasiFrame, evaluate, hamel_at
from hamel_oc.models import MODEL_NAMES, BuiltinModel, Scenario, builtin
from hamel_oc.phase import Layout, PhaseState
from hamel_oc.problems import (
    BoundaryConditions,
    CostDynamic,
    CostKinematic,
    DynamicOCP,
    KinematicOCP,
    MechanicalSystem,
    validate,
)
from hamel_oc.solvers import (
    ShootingConfig,
    ShootingResult,
    Trajectory,
    augmented_cost,
    evaluate_cost,
    integrate,
    shoot_dynamic,
    shoot_kinematic,
    simulate,
    solve_with_restarts,
)
from hamel_oc.verify import stationarity_probe, verify_model

__version__ = "0.1.0"

__all__ = [
    "MODEL_NAMES",
    "BoundaryConditions",
    "BuiltinModel",
    "ConfigError",
    "CostDynamic",
    "CostKinematic",
    "DynamicOCP",
    "HamelError",
    "InvalidProblem",
    "KinematicOCP",
    "Layout",
    "MechanicalSystem",
    "NoConvergence",
    "PhaseState",
    "QuasiFrame",
    "Scenario",
    "ShootingConfig",
    "ShootingResult",
    "SingularFrame",
    "SingularJacobian",
    "SingularMass",
    "Trajectory",
    "UnknownModel",
    "UnsupportedLayout",
    "augmented_cost",
    "builtin",
    "dynamic_rhs",
    "evaluate",
    "evaluate_cost",
    "hamel_at",
    "integrate",
    "kappa",
    "kinematic_rhs",
    "mechanics_rhs",
    "recover_controls",
    "rhs_function",
    "shoot_dynamic",
    "shoot_kinematic",
    "simulate",
    "solve_with_restarts",
    "stationarity_probe",
    "validate",
    "verify_model",
]
