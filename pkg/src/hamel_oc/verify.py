"""Verification harness shared by the test suite and the ``verify`` subcommand.

Every sampled check draws from ``numpy.random.default_rng(seed)`` and logs the
seed, so any report can be reproduced from the log alone.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Callable, Iterable, Mapping
from typing import Any

import numpy as np
import scipy.integrate
import scipy.interpolate
import scipy.linalg
import scipy.optimize
from numpy.polynomial import legendre
from numpy.typing import NDArray

from hamel_oc.assembly import mechanics_rhs, rhs_function
from hamel_oc.errors import HamelError, SingularFrame
from hamel_oc.frames import QuasiFrame, evaluate, hamel_at, jacobian_at
from hamel_oc.models import BuiltinModel, first_integrals, reference_rhs
from hamel_oc.numdiff import central_jacobian
from hamel_oc.phase import Layout, PhaseState, block_slices, state_size
from hamel_oc.problems import KinematicOCP, Problem
from hamel_oc.solvers import ShootingConfig, Trajectory, rk4_grid, solve_with_restarts

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DEFAULT_SEED = 0xB01

FRAME_THRESHOLDS: dict[str, float] = {
    "inverse": 1e-10,
    "antisymmetry": 1e-12,
    "hamel_fd": 1e-6,
}
RHS_THRESHOLD = 1e-8
MONITOR_THRESHOLDS: dict[str, float] = {
    "constraint": 1e-8,
    "constraint_path": 1e-6,
    "mu": 1e-10,
    # RK4 shrinks the rotating (u₂, u₃) circle by O(h⁴) per unit time
    "speed_sq": 1e-7,
    "energy": 1e-8,
    "momentum_sq": 1e-8,
    "kappa_sq": 1e-6,
    "sphere_c": 1e-6,
}
STATIONARITY_THRESHOLD = 1e-8
PERTURBATION_AMPLITUDE = 1e-3
CHORD_ITERS = 8
# least_squares budget per correction coefficient
REMATCH_EVALUATIONS = 40


@dataclasses.dataclass(frozen=True)
class CheckResult:
    """One named check.

    Attributes:
        name: Check identifier, e.g. ``"inverse"`` or ``"rhs:kinematicOC"``.
        max_abs_error: Largest deviation observed.
        threshold: Largest deviation allowed.
        samples: Number of sample points that entered the error.
        detail: Free-form context, e.g. a recorded exception.
        data: Extra figures worth reporting.
    """

    name: str
    max_abs_error: float
    threshold: float
    samples: int
    detail: str = ""
    data: Mapping[str, float] = dataclasses.field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_error <= self.threshold)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "max_abs_error": _jsonable(self.max_abs_error),
            "threshold": self.threshold,
            "passed": self.passed,
            "samples": self.samples,
            "detail": self.detail,
            "data": {key: _jsonable(value) for key, value in self.data.items()},
        }


def _jsonable(value: float) -> float | str:
    value = float(value)
    return value if np.isfinite(value) else str(value)


@dataclasses.dataclass
class VerificationReport:
    """Named checks about one subject (a frame, a model, a trajectory)."""

    subject: str
    checks: list[CheckResult] = dataclasses.field(default_factory=list)
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, check: CheckResult) -> None:
        self.checks.append(check)
        log = logger.info if check.passed else logger.warning
        log(
            "%s %s: max error %.3e (threshold %.1e) %s",
            self.subject,
            check.name,
            check.max_abs_error,
            check.threshold,
            "pass" if check.passed else "FAIL",
        )

    def extend(self, other: VerificationReport) -> None:
        for check in other.checks:
            self.checks.append(check)

    def check(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject": self.subject,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }


def _rng(seed: int, what: str) -> np.random.Generator:
    logger.info("Sampling %s with seed %d", what, seed)
    return np.random.default_rng(seed)


def _uniform(
    rng: np.random.Generator, box: tuple[FloatArray, FloatArray]
) -> FloatArray:
    lower, upper = box
    return rng.uniform(lower, upper)


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


def check_frame(
    frame: QuasiFrame,
    box: tuple[FloatArray, FloatArray],
    count: int = 50,
    *,
    seed: int = DEFAULT_SEED,
    thresholds: Mapping[str, float] | None = None,
) -> VerificationReport:
    """Check Φ = Ψ⁻¹, γ antisymmetry and analytic-vs-differenced γ.

    Singular sample points are recorded as a failed ``singular`` check; the
    remaining points still feed the other checks.
    """
    limits = FRAME_THRESHOLDS | dict(thresholds or {})
    rng = _rng(seed, f"frame {frame.name}")
    report = VerificationReport(subject=frame.name, seed=seed)
    inverse = antisym = fd_gap = 0.0
    good = 0
    singular: list[str] = []
    for _ in range(count):
        q = _uniform(rng, box)
        try:
            point = evaluate(frame, q)
        except SingularFrame as exc:
            singular.append(str(exc))
            continue
        good += 1
        inverse = max(
            inverse, float(np.max(np.abs(point.psi @ point.phi - np.eye(frame.n))))
        )
        gamma = point.hamel().gamma
        antisym = max(antisym, float(np.max(np.abs(gamma + gamma.transpose(0, 2, 1)))))
        if frame.psi_jacobian is not None:
            differenced = central_jacobian(
                lambda x: np.asarray(frame.psi(x), dtype=float), q, frame.fd_step
            )
            analytic = jacobian_at(frame, q)
            curl_gap = (analytic - analytic.transpose(0, 2, 1)) - (
                differenced - differenced.transpose(0, 2, 1)
            )
            gap = np.einsum("sij,ip,jq->spq", curl_gap, point.phi, point.phi)
            fd_gap = max(fd_gap, float(np.max(np.abs(gap))))

    if singular:
        report.add(
            CheckResult(
                name="singular",
                max_abs_error=float("inf"),
                threshold=0.0,
                samples=len(singular),
                detail=singular[0],
            )
        )
    report.add(CheckResult("inverse", inverse, limits["inverse"], good))
    report.add(CheckResult("antisymmetry", antisym, limits["antisymmetry"], good))
    if frame.psi_jacobian is not None:
        report.add(CheckResult("hamel_fd", fd_gap, limits["hamel_fd"], good))
    return report


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------


def random_state(
    model: BuiltinModel, layout: Layout, rng: np.random.Generator
) -> PhaseState:
    """A phase state with q in the model's box and every rate in [-1, 1]."""
    frame = model.frame
    n, m = frame.n, frame.m
    vector = rng.uniform(-1.0, 1.0, state_size(layout, n, m))
    vector[block_slices(layout, n, m)["q"]] = _uniform(rng, model.box)
    return PhaseState(layout, n, m, vector)


def compare_rhs(
    model: BuiltinModel,
    layout: Layout,
    count: int = 200,
    *,
    seed: int = DEFAULT_SEED,
    threshold: float = RHS_THRESHOLD,
) -> VerificationReport:
    """Largest gap between the assembled and the reference right-hand side.

    Mechanics states are paired with random constant forces in [-1, 1].

    Raises:
        UnsupportedLayout: If the model lacks *layout*.
    """
    problem = model.problem(layout)
    generic = rhs_function(problem) if layout is not Layout.MECHANICS else None
    rng = _rng(seed, f"{model.name} {layout.value} states")
    worst = 0.0
    for _ in range(count):
        state = random_state(model, layout, rng)
        if generic is None:
            forces = rng.uniform(-1.0, 1.0, model.frame.k)
            assembled = mechanics_rhs(problem, forces, state)
        else:
            forces = None
            assembled = generic(0.0, state.vector)
        expected = reference_rhs(model, layout, state, forces)
        worst = max(worst, float(np.max(np.abs(assembled - expected))))
    report = VerificationReport(subject=model.name, seed=seed)
    report.add(CheckResult(f"rhs:{layout.value}", worst, threshold, count))
    return report


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------


def _path_rates(trajectory: Trajectory) -> tuple[FloatArray, FloatArray]:
    """Fourth-order central differences of the stored q at interior points."""
    q = trajectory.block("q")
    h = trajectory.t[1] - trajectory.t[0]
    rates = (-q[4:] + 8.0 * q[3:-1] - 8.0 * q[1:-3] + q[:-4]) / (12.0 * h)
    return q[2:-2], rates


def monitor(
    trajectory: Trajectory,
    model: BuiltinModel,
    *,
    thresholds: Mapping[str, float] | None = None,
) -> VerificationReport:
    """Drift of the constraint residual and the model's first integrals.

    ``constraint`` evaluates Ψ(q)Φ(q)u on the stored states, while
    ``constraint_path`` differences the stored q itself, so it also catches
    a path that leaves the constraint distribution.  First-integral drift is
    the largest deviation from the value at the first grid point, divided by
    ``max(1, |initial value|)``.  Mechanics first integrals only hold for
    force-free flows.
    """
    limits = MONITOR_THRESHOLDS | dict(thresholds or {})
    frame = model.frame
    con = frame.constrained_indices
    report = VerificationReport(subject=f"{model.name}:{trajectory.layout.value}")
    residual = 0.0
    series: dict[str, list[FloatArray]] = {}
    for i in range(trajectory.t.size):
        state = trajectory.state(i)
        point = evaluate(frame, state.q)
        qdot = point.phi @ frame.expand(state.u)
        if frame.m:
            residual = max(residual, float(np.max(np.abs((point.psi @ qdot)[con]))))
        for name, value in first_integrals(model, state).items():
            series.setdefault(name, []).append(np.atleast_1d(value))
    samples = trajectory.t.size
    report.add(CheckResult("constraint", residual, limits["constraint"], samples))
    if frame.m and samples >= 5:
        path_gap = 0.0
        for q, rate in zip(*_path_rates(trajectory)):
            slip = (evaluate(frame, q).psi @ rate)[con]
            path_gap = max(path_gap, float(np.max(np.abs(slip))))
        report.add(
            CheckResult(
                "constraint_path", path_gap, limits["constraint_path"], samples - 4
            )
        )
    for name, values in series.items():
        stacked = np.array(values)
        initial = float(np.max(np.abs(stacked[0]), initial=0.0))
        drift = float(np.max(np.abs(stacked - stacked[0]), initial=0.0))
        report.add(
            CheckResult(
                name,
                drift / max(1.0, initial),
                limits.get(name, RHS_THRESHOLD),
                samples,
                data={"initial": initial, "abs_drift": drift},
            )
        )
    return report


# ---------------------------------------------------------------------------
# Stationarity
# ---------------------------------------------------------------------------


class _Rollout:
    """Integrates the kinematics under an explicit control signal.

    Kinematic problems drive q̇ = Φ(q)u with the free u as control; dynamic
    problems drive (q̇, u̇) = (Φ(q)u, a) with the free a as control.
    """

    def __init__(self, problem: Problem, trajectory: Trajectory, modes: int) -> None:
        self.problem = problem
        self.frame = problem.frame
        self.kinematic = isinstance(problem, KinematicOCP)
        self.t = trajectory.t
        self.t0, self.duration = trajectory.t[0], trajectory.t[-1] - trajectory.t[0]
        q = trajectory.block("q")
        u = trajectory.block("u")
        nodes = u if self.kinematic else trajectory.block("a")
        self.baseline = scipy.interpolate.CubicSpline(self.t, nodes, axis=0)
        self.start = q[0] if self.kinematic else np.concatenate([q[0], u[0]])
        self.target = q[-1] if self.kinematic else np.concatenate([q[-1], u[-1]])
        k = self.frame.k
        equations = self.target.size
        self.modes = max(modes, -(-equations // k) + 2)
        self.width = k * self.modes

    def correction(self, t: float, x: FloatArray) -> FloatArray:
        s = 2.0 * (t - self.t0) / self.duration - 1.0
        basis = legendre.legvander(np.array([s]), self.modes - 1)[0]
        return x.reshape(self.frame.k, self.modes) @ basis

    def run(
        self, control: Callable[[float], FloatArray]
    ) -> tuple[FloatArray, float]:
        """Return (terminal mismatch, cost) under *control*."""
        frame, n = self.frame, self.frame.n

        def rhs(t: float, y: FloatArray) -> FloatArray:
            q = y[:n]
            phi = evaluate(frame, q).phi
            if self.kinematic:
                return phi @ frame.expand(control(t))
            return np.concatenate([phi @ frame.expand(y[n:]), control(t)])

        states = rk4_grid(rhs, self.start, self.t)
        cost = self.problem.cost
        if self.kinematic:
            values = [cost.c(y[:n], control(t)) for t, y in zip(self.t, states)]
        else:
            values = [cost.c(y[:n], y[n:], control(t)) for t, y in zip(self.t, states)]
        total = float(scipy.integrate.simpson(np.array(values), x=self.t))
        return states[-1] - self.target, total


def _matched_cost(
    rollout: _Rollout,
    signal: Callable[[float], FloatArray],
    jacobian: FloatArray,
    tol: float,
    max_iters: int = CHORD_ITERS,
) -> float:
    """Cost of *signal* after a Legendre correction restores the endpoints.

    A few chord steps with the baseline *jacobian* come first; if they stall,
    ``scipy.optimize.least_squares`` re-solves from the last correction with
    its own Jacobian.
    """
    x = np.zeros(rollout.width)

    def corrected(x: FloatArray) -> Callable[[float], FloatArray]:
        return lambda t: signal(t) + rollout.correction(t, x)

    best, best_gap = x, np.inf
    for _ in range(max_iters):
        mismatch, cost = rollout.run(corrected(x))
        gap = float(np.max(np.abs(mismatch)))
        if gap <= tol:
            return cost
        if gap < best_gap:
            best, best_gap = x, gap
        step, *_ = scipy.linalg.lstsq(jacobian, -mismatch, cond=1e-10)
        x = x + step

    fit = scipy.optimize.least_squares(
        lambda x: rollout.run(corrected(x))[0],
        best,
        method="trf",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=REMATCH_EVALUATIONS * rollout.width,
    )
    mismatch, cost = rollout.run(corrected(fit.x))
    if np.max(np.abs(mismatch)) <= tol:
        return cost
    raise HamelError(
        f"endpoint re-matching stalled (mismatch {np.max(np.abs(mismatch)):.3e})"
    )


def stationarity_probe(
    problem: Problem,
    trajectory: Trajectory,
    probes: int = 20,
    *,
    seed: int = DEFAULT_SEED,
    amplitude: float = PERTURBATION_AMPLITUDE,
    threshold: float = STATIONARITY_THRESHOLD,
    modes: int = 3,
    match_tol: float = 1e-11,
) -> VerificationReport:
    """First-order optimality witness for a converged solution.

    The control signal (u for kinematic, a for dynamic problems) is read off
    *trajectory*, perturbed by random sine modes of norm *amplitude*, and
    corrected by a minimum-norm Legendre combination until the endpoints
    match the trajectory's endpoints again.  The cost change against the
    equally re-matched baseline must not be negative beyond *threshold*.
    Perturbations whose re-matching fails are counted, not raised; the check
    fails when none of them re-matches.
    """
    rollout = _Rollout(problem, trajectory, modes)
    rng = _rng(seed, f"{problem.name} stationarity perturbations")
    report = VerificationReport(subject=problem.name, seed=seed)
    k = rollout.frame.k

    def column(j: int) -> FloatArray:
        x = np.zeros(rollout.width)
        x[j] = 1e-6
        mismatch, _ = rollout.run(
            lambda t: rollout.baseline(t) + rollout.correction(t, x)
        )
        return (mismatch - base_mismatch) / 1e-6

    try:
        base_mismatch, _ = rollout.run(rollout.baseline)
        jacobian = np.stack([column(j) for j in range(rollout.width)], axis=1)
        base_cost = _matched_cost(rollout, rollout.baseline, jacobian, match_tol)
    except HamelError as exc:
        report.add(
            CheckResult("stationarity", float("inf"), threshold, 0, detail=str(exc))
        )
        return report

    deltas: list[float] = []
    failures: list[str] = []
    for _ in range(probes):
        coeffs = rng.standard_normal((k, modes))
        coeffs *= amplitude / np.linalg.norm(coeffs)
        freqs = np.pi * np.arange(1, modes + 1)

        def signal(t: float, coeffs: FloatArray = coeffs) -> FloatArray:
            s = (t - rollout.t0) / rollout.duration
            return rollout.baseline(t) + coeffs @ np.sin(freqs * s)

        try:
            deltas.append(
                _matched_cost(rollout, signal, jacobian, match_tol) - base_cost
            )
        except HamelError as exc:
            failures.append(str(exc))

    if deltas:
        lowest = min(deltas)
        error = max(0.0, -lowest)
        detail = f"{len(failures)} of {probes} failed to re-match" if failures else ""
    else:
        lowest, error = float("nan"), float("inf")
        detail = "no perturbation re-matched the endpoints"
        if failures:
            detail += f"; first failure: {failures[0]}"
    report.add(
        CheckResult(
            "stationarity",
            error,
            threshold,
            len(deltas),
            detail=detail,
            data={
                "min_delta": lowest,
                "baseline_cost": base_cost,
                "failures": float(len(failures)),
            },
        )
    )
    return report


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def verify_model(
    model: BuiltinModel,
    *,
    seed: int = DEFAULT_SEED,
    count: int = 200,
    bvp: bool = True,
    probes: int = 20,
    config: ShootingConfig | None = None,
) -> VerificationReport:
    """Run every applicable check on a built-in model.

    Frame and right-hand-side checks always run.  With *bvp*, each optimal
    control scenario is solved, monitored and checked for stationarity; a
    scenario that fails to solve is recorded as a failed check.
    """
    report = VerificationReport(subject=model.name, seed=seed)
    report.extend(check_frame(model.frame, model.box, min(count, 50), seed=seed))
    for layout in model.layouts:
        if layout in model.references:
            report.extend(compare_rhs(model, layout, count, seed=seed))
    if not bvp:
        return report
    base = config or ShootingConfig()
    for scenario in model.scenarios.values():
        if scenario.layout is Layout.MECHANICS:
            continue
        problem = model.problem(scenario.layout)
        steps = scenario.steps or base.steps
        settings = dataclasses.replace(base, steps=steps)
        label = f"bvp:{scenario.name}"
        try:
            result = solve_with_restarts(problem, scenario.bc, settings, scenario.guess)
        except HamelError as exc:
            report.add(
                CheckResult(label, float("inf"), settings.newton_tol, 0, str(exc))
            )
            continue
        report.add(CheckResult(label, result.residual, settings.newton_tol, 1))
        for check in monitor(result.trajectory, model).checks:
            report.checks.append(_renamed(check, f"{scenario.name}:{check.name}"))
        stationarity = stationarity_probe(
            problem, result.trajectory, probes, seed=seed
        )
        for check in stationarity.checks:
            report.checks.append(_renamed(check, f"{scenario.name}:{check.name}"))
    return report


def _renamed(check: CheckResult, name: str) -> CheckResult:
    return CheckResult(
        name,
        check.max_abs_error,
        check.threshold,
        check.samples,
        check.detail,
        check.data,
    )


def summarize(reports: Iterable[VerificationReport]) -> dict[str, Any]:
    """JSON-ready summary of several reports."""
    items = [report.to_dict() for report in reports]
    return {"passed": all(item["passed"] for item in items), "reports": items}


def hamel_coefficients(frame: QuasiFrame, q: FloatArray) -> dict[str, float]:
    """Nonzero Hamel coefficients at *q*, keyed ``"s,p,q"`` with 1-based indices."""
    gamma = hamel_at(frame, q).gamma
    found: dict[str, float] = {}
    for s, p, r in zip(*np.nonzero(np.abs(gamma) > 1e-12)):
        found[f"{s + 1},{p + 1},{r + 1}"] = float(gamma[s, p, r])
    return found
