"""Fixed-step integration and single-shooting solution of the optimal control BVPs.

Shooting unknowns are the initial values the boundary data leave open:

* kinematic problems: ``(uᴵ(t0), μ_σ(t0))``, n values, matched against
  ``q(t1) - q1``;
* dynamic problems: ``(aᴬ(t0), ȷᴬ(t0), μ_σ(t0))``, 2n-m values, matched
  against ``(q(t1) - q1, uᴬ(t1) - u1)``.

Newton uses a forward-difference Jacobian, a minimum-norm step and a
backtracking line search.  When the search stalls, the step is retried with
the Jacobian's noise-level singular directions dropped.  Jacobian columns are
independent integrations and may run on a thread pool.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.integrate
import scipy.linalg
from numpy.typing import NDArray

from hamel_oc.assembly import Forces, Rhs, layout_of, rhs_function
from hamel_oc.errors import (
    NoConvergence,
    SingularFrame,
    SingularJacobian,
    SingularMass,
)
from hamel_oc.frames import evaluate
from hamel_oc.phase import Layout, PhaseState, block_slices, state_size
from hamel_oc.problems import (
    BoundaryConditions,
    DynamicOCP,
    KinematicOCP,
    MechanicalSystem,
    Problem,
    validate,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

MIN_STEPS = 16
LSTSQ_RCOND = 1e-10
# Warm starts solve on steps // COARSE_FACTOR to a loosened tolerance.
COARSE_FACTOR = 4
COARSE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on a uniform time grid.

    Attributes:
        t: Grid of ``steps + 1`` strictly increasing times.
        states: Array of shape ``(steps + 1, state_size)``, one row per time.
        layout: Layout shared by every row.
        n: Configuration dimension.
        m: Number of constraints.
    """

    t: FloatArray
    states: FloatArray
    layout: Layout
    n: int
    m: int

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("trajectory needs at least two grid points")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory grid must be strictly increasing")
        width = state_size(self.layout, self.n, self.m)
        if states.shape != (t.size, width):
            raise ValueError(
                f"states shape {states.shape}, expected {(t.size, width)}"
            )
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "states", states)

    @property
    def steps(self) -> int:
        return self.t.size - 1

    def state(self, index: int) -> PhaseState:
        return PhaseState(self.layout, self.n, self.m, self.states[index])

    @property
    def initial(self) -> PhaseState:
        return self.state(0)

    @property
    def final(self) -> PhaseState:
        return self.state(-1)

    def block(self, name: str) -> FloatArray:
        """Columns of one block over the whole grid, shape ``(steps + 1, size)``."""
        slices = block_slices(self.layout, self.n, self.m)
        if name not in slices:
            raise KeyError(f"{self.layout.value} layout has no '{name}' block")
        return self.states[:, slices[name]]


@dataclass(frozen=True)
class ShootingConfig:
    """Numerical settings of the shooting solver.

    Attributes:
        steps: RK4 steps across the horizon.
        newton_tol: Convergence threshold on the residual ∞-norm.
        max_iters: Newton iteration limit.
        fd_step: Relative forward-difference step of the Jacobian columns.
        damping: Backtracking factor of the line search.
        min_step: Smallest line-search step before giving up.
        restarts: Random restarts tried by :func:`solve_with_restarts`.
        restart_scale: Relative spread of restart guesses.
        seed: Seed of the restart generator.
        workers: Threads used for Jacobian columns; 1 runs them inline.
        degenerate_ratio: Singular values below this fraction of the largest
            are reported as degenerate directions.
    """

    steps: int = 200
    newton_tol: float = 1e-9
    max_iters: int = 50
    fd_step: float = 1e-6
    damping: float = 0.5
    min_step: float = 2.0**-20
    restarts: int = 8
    restart_scale: float = 0.5
    seed: int = 0
    workers: int = 1
    degenerate_ratio: float = 1e-10

    def __post_init__(self) -> None:
        if self.steps < MIN_STEPS:
            raise ValueError(f"steps must be at least {MIN_STEPS}, got {self.steps}")
        for name in ("newton_tol", "fd_step", "min_step", "degenerate_ratio"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.workers < 1:
            raise ValueError("max_iters and workers must be at least 1")
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")


@dataclass(frozen=True, eq=False)
class ShootingResult:
    """Converged shooting solution and its Newton diagnostics."""

    trajectory: Trajectory
    unknowns: FloatArray
    residual: float
    iterations: int
    singular_values: FloatArray = field(repr=False)
    degenerate_directions: FloatArray = field(repr=False)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def integrate(
    rhs: Rhs, initial: PhaseState, t0: float, t1: float, steps: int
) -> Trajectory:
    """Classical fourth-order Runge-Kutta on a uniform grid.

    Args:
        rhs: ``f(t, y) -> ẏ`` on flat vectors.
        initial: State at *t0*.
        t0: Start time.
        t1: End time, greater than *t0*.
        steps: Number of RK4 steps, at least 1.

    Returns:
        Trajectory with ``steps + 1`` rows.

    Raises:
        Any error raised by *rhs*, annotated with the failing step and time.
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    if not t1 > t0:
        raise ValueError(f"t1 ({t1}) must exceed t0 ({t0})")
    t = np.linspace(t0, t1, steps + 1)
    states = rk4_grid(rhs, initial.vector, t)
    return Trajectory(
        t=t, states=states, layout=initial.layout, n=initial.n, m=initial.m
    )


def rk4_grid(rhs: Rhs, y0: FloatArray, t: FloatArray) -> FloatArray:
    """RK4 over the given uniform grid on plain vectors, one row per time."""
    steps = t.size - 1
    h = (t[-1] - t[0]) / steps
    states = np.empty((t.size, np.size(y0)))
    y = np.array(y0, dtype=float)
    states[0] = y
    for i in range(steps):
        ti = t[i]
        try:
            k1 = rhs(ti, y)
            k2 = rhs(ti + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(ti + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(ti + h, y + h * k3)
        except Exception as exc:
            exc.add_note(f"while integrating step {i + 1} of {steps} at t={ti:.6g}")
            raise
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1] = y
    return states


def simulate(
    system: MechanicalSystem,
    forces: Forces | FloatArray | None,
    q0: FloatArray,
    u0_free: FloatArray,
    t0: float,
    t1: float,
    steps: int,
) -> Trajectory:
    """Forward Boltzmann-Hamel simulation under the given free forces."""
    frame = system.frame
    initial = PhaseState.pack(Layout.MECHANICS, frame.n, frame.m, q=q0, u=u0_free)
    logger.info(
        "Simulating %s over [%g, %g] with %d steps", system.name, t0, t1, steps
    )
    return integrate(rhs_function(system, forces), initial, t0, t1, steps)


# ---------------------------------------------------------------------------
# Shooting
# ---------------------------------------------------------------------------


def unknown_count(problem: Problem) -> int:
    """Number of shooting unknowns: n (kinematic) or 2n - m (dynamic)."""
    frame = problem.frame
    return frame.n if isinstance(problem, KinematicOCP) else frame.n + frame.k


def initial_state(
    problem: Problem, bc: BoundaryConditions, unknowns: FloatArray
) -> PhaseState:
    """Phase state at t0 built from the boundary data and shooting unknowns."""
    frame = problem.frame
    n, m, k = frame.n, frame.m, frame.k
    x = np.asarray(unknowns, dtype=float)
    if x.shape != (unknown_count(problem),):
        raise ValueError(
            f"expected {unknown_count(problem)} shooting unknowns, got {x.size}"
        )
    if isinstance(problem, KinematicOCP):
        return PhaseState.pack(Layout.KINEMATIC, n, m, q=bc.q0, u=x[:k], mu=x[k:])
    return PhaseState.pack(
        Layout.DYNAMIC,
        n,
        m,
        q=bc.q0,
        u=bc.u0_free,
        a=x[:k],
        j=x[k : 2 * k],
        mu=x[2 * k :],
    )


def terminal_residual(
    problem: Problem, bc: BoundaryConditions, final: PhaseState
) -> FloatArray:
    """Mismatch of the final state against the prescribed endpoint data."""
    gap = final.q - bc.q1
    if isinstance(problem, DynamicOCP):
        gap = np.concatenate([gap, final.u - bc.u1_free])
    return gap


def default_guess(problem: Problem, bc: BoundaryConditions) -> FloatArray:
    """Initial shooting unknowns implied by the chart displacement.

    The displacement Δ = Ψ(q0)(q1 - q0) restricted to the free slots is
    spread over the horizon.  Kinematic problems take the constant rate Δ/T.
    Dynamic problems take the constant-jerk profile that meets u0, u1 and
    integrates to Δ.  Multipliers start at zero.
    """
    frame = problem.frame
    duration = bc.duration
    delta = (evaluate(frame, bc.q0).psi @ (bc.q1 - bc.q0))[frame.free_indices]
    mu = np.zeros(frame.m)
    if isinstance(problem, KinematicOCP):
        return np.concatenate([delta / duration, mu])
    u0, u1 = bc.u0_free, bc.u1_free
    jerk = (6.0 * duration * (u0 + u1) - 12.0 * delta) / duration**3
    accel = (u1 - u0 - 0.5 * jerk * duration**2) / duration
    return np.concatenate([accel, jerk, mu])


class _Shooter:
    """Maps shooting unknowns to terminal residuals for one problem."""

    def __init__(
        self, problem: Problem, bc: BoundaryConditions, config: ShootingConfig
    ) -> None:
        self.problem = problem
        self.bc = bc
        self.config = config
        self.rhs = rhs_function(problem)

    def shoot(self, unknowns: FloatArray) -> tuple[FloatArray, Trajectory]:
        start = initial_state(self.problem, self.bc, unknowns)
        trajectory = integrate(
            self.rhs, start, self.bc.t0, self.bc.t1, self.config.steps
        )
        return terminal_residual(self.problem, self.bc, trajectory.final), trajectory

    def _column(self, x: FloatArray, base: FloatArray, k: int) -> FloatArray:
        h = self.config.fd_step * max(1.0, abs(float(x[k])))
        for sign in (1.0, -1.0):
            shifted = x.copy()
            shifted[k] += sign * h
            try:
                residual, _ = self.shoot(shifted)
            except (SingularFrame, SingularMass):
                continue
            return sign * (residual - base) / h
        return np.full(base.size, np.nan)

    def jacobian(self, x: FloatArray, base: FloatArray) -> FloatArray:
        """Forward-difference Jacobian, backward columns near a singularity."""
        indices = range(x.size)
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                columns = list(pool.map(lambda k: self._column(x, base, k), indices))
        else:
            columns = [self._column(x, base, k) for k in indices]
        return np.stack(columns, axis=1)


def _norm(residual: FloatArray) -> float:
    return float(np.max(np.abs(residual))) if residual.size else 0.0


def _diagnose(
    jac: FloatArray, ratio: float
) -> tuple[FloatArray, FloatArray]:
    _, sigma, vh = scipy.linalg.svd(jac)
    if sigma.size == 0 or sigma[0] == 0:
        return sigma, vh
    weak = sigma < ratio * sigma[0]
    padded = np.concatenate([weak, np.ones(vh.shape[0] - sigma.size, dtype=bool)])
    return sigma, vh[padded]


def _candidate_steps(
    jac: FloatArray, residual: FloatArray, fd_step: float
) -> list[FloatArray]:
    """Minimum-norm Newton step, then the step restricted to resolved directions.

    Directions whose singular value sits below ``sqrt(fd_step)`` of the largest
    are dominated by finite-difference noise; the truncated step ignores them.
    """
    full, *_ = scipy.linalg.lstsq(jac, -residual, cond=LSTSQ_RCOND)
    left, sigma, vh = scipy.linalg.svd(jac, full_matrices=False)
    keep = sigma > np.sqrt(fd_step) * sigma[0]
    truncated = vh[keep].T @ ((left[:, keep].T @ -residual) / sigma[keep])
    return [full, truncated]


def _line_search(
    shooter: _Shooter, x: FloatArray, step: FloatArray, current: float
) -> tuple[float, FloatArray, FloatArray, Trajectory] | None:
    """Backtrack along *step* until the residual decreases or meets tolerance."""
    config = shooter.config
    length = 1.0
    while length >= config.min_step:
        trial = x + length * step
        try:
            trial_residual, trial_trajectory = shooter.shoot(trial)
        except (SingularFrame, SingularMass):
            length *= config.damping
            continue
        if np.all(np.isfinite(trial_residual)) and (
            np.linalg.norm(trial_residual) < current
            or _norm(trial_residual) <= config.newton_tol
        ):
            return length, trial, trial_residual, trial_trajectory
        length *= config.damping
    return None


def _newton(shooter: _Shooter, guess: FloatArray, label: str) -> ShootingResult:
    config = shooter.config
    x = np.asarray(guess, dtype=float).copy()
    try:
        residual, trajectory = shooter.shoot(x)
    except (SingularFrame, SingularMass) as exc:
        raise NoConvergence(
            f"{label}: integration from the initial guess failed ({exc})",
            unknowns=x,
            residual=float("inf"),
            iterations=0,
        ) from exc
    norm = _norm(residual)
    iterations = 0
    logger.debug("%s: iteration 0, residual %.3e", label, norm)

    while norm > config.newton_tol:
        if iterations >= config.max_iters:
            raise NoConvergence(
                f"{label}: iteration limit reached",
                unknowns=x,
                residual=norm,
                iterations=iterations,
            )
        jac = shooter.jacobian(x, residual)
        if not np.all(np.isfinite(jac)) or not np.any(jac):
            raise SingularJacobian(
                f"{label}: shooting Jacobian is zero or non-finite at iteration "
                f"{iterations + 1}"
            )
        current = float(np.linalg.norm(residual))
        found = None
        for step in _candidate_steps(jac, residual, config.fd_step):
            found = _line_search(shooter, x, step, current)
            if found is not None:
                break
        if found is None:
            raise NoConvergence(
                f"{label}: line search stalled",
                unknowns=x,
                residual=norm,
                iterations=iterations,
            )
        iterations += 1
        length, x, residual, trajectory = found
        norm = _norm(residual)
        logger.debug(
            "%s: iteration %d, residual %.3e, step length %.3g",
            label,
            iterations,
            norm,
            length,
        )

    sigma, directions = _diagnose(
        shooter.jacobian(x, residual), config.degenerate_ratio
    )
    if directions.size:
        logger.warning(
            "%s: %d degenerate direction(s) in the shooting Jacobian",
            label,
            directions.shape[0],
        )
    logger.info(
        "%s: converged in %d iterations, residual %.3e", label, iterations, norm
    )
    return ShootingResult(
        trajectory=trajectory,
        unknowns=x,
        residual=norm,
        iterations=iterations,
        singular_values=sigma,
        degenerate_directions=directions,
    )


def shoot_kinematic(
    ocp: KinematicOCP,
    bc: BoundaryConditions,
    guess: FloatArray,
    config: ShootingConfig | None = None,
) -> ShootingResult:
    """Solve a kinematic optimal control BVP by single shooting.

    Args:
        ocp: Problem definition.
        bc: Endpoint configurations and horizon.
        guess: Initial unknowns ``(uᴵ(t0), μ_σ(t0))``.
        config: Solver settings; defaults to :class:`ShootingConfig`.

    Raises:
        InvalidProblem: If the problem fails validation.
        NoConvergence: If Newton stops short of ``config.newton_tol``.
        SingularJacobian: If the Jacobian carries no information.
    """
    validate(ocp, bc)
    config = config or ShootingConfig()
    return _newton(_Shooter(ocp, bc, config), guess, ocp.name)


def shoot_dynamic(
    ocp: DynamicOCP,
    bc: BoundaryConditions,
    guess: FloatArray,
    config: ShootingConfig | None = None,
) -> ShootingResult:
    """Solve a dynamic optimal control BVP by single shooting.

    Args:
        ocp: Problem definition.
        bc: Endpoint configurations, endpoint free quasi-velocities, horizon.
        guess: Initial unknowns ``(aᴬ(t0), ȷᴬ(t0), μ_σ(t0))``.
        config: Solver settings; defaults to :class:`ShootingConfig`.

    Raises:
        InvalidProblem: If the problem fails validation.
        NoConvergence: If Newton stops short of ``config.newton_tol``.
        SingularJacobian: If the Jacobian carries no information.
    """
    validate(ocp, bc)
    config = config or ShootingConfig()
    return _newton(_Shooter(ocp, bc, config), guess, ocp.name)


def shoot(
    problem: Problem,
    bc: BoundaryConditions,
    guess: FloatArray,
    config: ShootingConfig | None = None,
) -> ShootingResult:
    """Dispatch to :func:`shoot_kinematic` or :func:`shoot_dynamic`."""
    if isinstance(problem, KinematicOCP):
        return shoot_kinematic(problem, bc, guess, config)
    return shoot_dynamic(problem, bc, guess, config)


def _coarse_start(
    problem: Problem, bc: BoundaryConditions, config: ShootingConfig, base: FloatArray
) -> FloatArray | None:
    """Unknowns of a loose solve on a quarter of the grid, or None on failure."""
    steps = max(MIN_STEPS, config.steps // COARSE_FACTOR)
    if steps >= config.steps:
        return None
    coarse = replace(
        config, steps=steps, newton_tol=max(config.newton_tol, COARSE_TOL)
    )
    try:
        result = shoot(problem, bc, base, coarse)
    except (NoConvergence, SingularJacobian) as exc:
        logger.debug("Coarse start on %d steps failed: %s", steps, exc)
        return None
    logger.debug("Coarse start on %d steps, residual %.3e", steps, result.residual)
    return result.unknowns


def solve_with_restarts(
    problem: Problem,
    bc: BoundaryConditions,
    config: ShootingConfig | None = None,
    guess: FloatArray | None = None,
) -> ShootingResult:
    """Shoot from a coarse-grid warm start, *guess*, then seeded perturbations.

    Raises:
        InvalidProblem: If the problem fails validation.
        NoConvergence: Carrying the best unknowns over all attempts when none
            converges.
    """
    validate(problem, bc)
    config = config or ShootingConfig()
    base = default_guess(problem, bc) if guess is None else np.asarray(guess, float)
    rng = np.random.default_rng(config.seed)
    scale = config.restart_scale * max(1.0, float(np.max(np.abs(base), initial=0.0)))
    best: NoConvergence | None = None
    candidates: list[FloatArray] = [base]
    candidates += [
        base + scale * rng.standard_normal(base.size) for _ in range(config.restarts)
    ]
    warm = _coarse_start(problem, bc, config, base)
    if warm is not None:
        candidates.insert(0, warm)
    for attempt, candidate in enumerate(candidates):
        try:
            return shoot(problem, bc, candidate, config)
        except NoConvergence as exc:
            logger.info(
                "Attempt %d of %d failed: %s", attempt + 1, len(candidates), exc
            )
            if best is None or exc.residual < best.residual:
                best = exc
        except SingularJacobian as exc:
            logger.info(
                "Attempt %d of %d failed: %s", attempt + 1, len(candidates), exc
            )
    if best is None:
        best = NoConvergence(
            "every attempt hit a singular Jacobian",
            unknowns=base,
            residual=float("inf"),
            iterations=0,
        )
    raise NoConvergence(
        f"no convergence after {len(candidates)} attempts; best: {best.reason}",
        unknowns=best.unknowns,
        residual=best.residual,
        iterations=best.iterations,
    )


# ---------------------------------------------------------------------------
# Cost functionals
# ---------------------------------------------------------------------------


def cost_samples(problem: Problem, trajectory: Trajectory) -> FloatArray:
    """Cost integrand C at every grid point."""
    expected = layout_of(problem)
    if trajectory.layout is not expected:
        raise ValueError(
            f"trajectory layout {trajectory.layout.value}, expected {expected.value}"
        )
    q = trajectory.block("q")
    u = trajectory.block("u")
    if isinstance(problem, KinematicOCP):
        return np.array([problem.cost.c(qi, ui) for qi, ui in zip(q, u)])
    a = trajectory.block("a")
    return np.array([problem.cost.c(qi, ui, ai) for qi, ui, ai in zip(q, u, a)])


def evaluate_cost(problem: Problem, trajectory: Trajectory) -> float:
    """Composite Simpson quadrature of the cost integrand along *trajectory*."""
    values = cost_samples(problem, trajectory)
    return float(scipy.integrate.simpson(values, x=trajectory.t))


def augmented_cost(problem: Problem, trajectory: Trajectory) -> float:
    """Cost plus ∫ μ_σ u^σ, with u^σ = Ψ(q) q̇ from differenced configurations.

    The multiplier term vanishes along admissible motion, so the gap to
    :func:`evaluate_cost` measures how well the stored path honours the
    constraints.
    """
    values = cost_samples(problem, trajectory)
    frame = problem.frame
    if frame.m:
        q = trajectory.block("q")
        qdot = np.gradient(q, trajectory.t, axis=0, edge_order=2)
        mu = trajectory.block("mu")
        con = frame.constrained_indices
        for i, (qi, vi) in enumerate(zip(q, qdot)):
            values[i] += float(mu[i] @ (evaluate(frame, qi).psi @ vi)[con])
    return float(scipy.integrate.simpson(values, x=trajectory.t))


def rhs_samples(
    rhs: Callable[[float, FloatArray], FloatArray], trajectory: Trajectory
) -> FloatArray:
    """Right-hand side evaluated at every stored grid point."""
    return np.array([rhs(ti, yi) for ti, yi in zip(trajectory.t, trajectory.states)])

