"""Patterned fronts from a symmetric wave train to 0, and closed loops of them.

A front is computed together with its wave train as one 12-dimensional
collocation problem on t ∈ [0, 1]:

* rows 0-3: the wave-train half period, θ = πt, with u(0), u(π) ∈ Fix R;
* rows 4-7: a phase segment w(t) = u_wt(φt) from u_wt(0) to u_wt(φ);
* rows 8-11: the front u_het(x) on [−X, 0], x = −X + Xt.

The left end of the front is pinned to the unstable Floquet fiber through
u_wt(φ) at distance δ, the right end lies in the stable eigenspace of 0.
The asymptotic phase relative to x = 0 is ψ = φ + ϖX.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.optimize import brentq

from .collocation import (
    BvpSolution,
    CollocationProblem,
    CollocationProfile,
    NewtonError,
    SingularJacobianError,
    jacobian_regularity,
    solve_bvp,
)
from .console import console, warn
from .constants import TWO_PI
from .continuation import Branch, StepConfig, continue_branch
from .models import Diagnostic
from .systems import ReversibleSystem
from .topology import PhaseLoop, circle_distance, wrap
from .wavetrain import (
    FloquetFrame,
    OrbitNeighbourhood,
    PeriodicOrbit,
    floquet_analysis,
    floquet_frame,
    neighbourhood_exit,
)

VARPI, PHI, MU, LENGTH = 0, 1, 2, 3
WAVE, SEGMENT, FRONT = slice(0, 4), slice(4, 8), slice(8, 12)


class FrontError(RuntimeError):
    """Raised for fronts that cannot be set up or pinned consistently."""


@dataclass(frozen=True, eq=False)
class ComponentProfile:
    """Rows ``rows`` of a coupled profile, re-parametrized by x = offset + scale·t."""

    base: object
    rows: slice
    offset: float
    scale: float

    @property
    def interval(self) -> tuple[float, float]:
        return (self.offset, self.offset + self.scale)

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        t = (np.asarray(x, dtype=float) - self.offset) / self.scale
        return np.asarray(self.base(t))[self.rows]

    def derivative(self, x: float | np.ndarray) -> np.ndarray:
        t = (np.asarray(x, dtype=float) - self.offset) / self.scale
        return np.asarray(self.base.derivative(t))[self.rows] / self.scale


@dataclass
class PatternedFront:
    """A front u_het on [−X, 0] leaving the wave train ``orbit`` towards 0."""

    mu: float
    orbit: PeriodicOrbit
    profile: object
    X: float
    psi: float
    exit_phase: float
    delta: float
    tail_amplitude: float
    sigma_min: float
    bc_residual: float = 0.0
    exit_offset: float = 0.0
    epsilon: float = 0.0
    sign: float = 1.0
    solution: BvpSolution | None = None
    unstable_basis: np.ndarray | None = None
    phase_fit: float | None = None
    phase_discrepancy: float | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        return self.profile(x)

    @property
    def varpi(self) -> float:
        return self.orbit.varpi

    def to_dict(self) -> dict[str, object]:
        return {
            "mu": self.mu,
            "varpi": self.varpi,
            "psi": self.psi,
            "exit_phase": self.exit_phase,
            "X": self.X,
            "delta": self.delta,
            "tail_amplitude": self.tail_amplitude,
            "sigma_min": self.sigma_min,
            "bc_residual": self.bc_residual,
            "exit_offset": self.exit_offset,
            "epsilon": self.epsilon,
        }


@dataclass
class PatternedBack:
    """The reflected front x ↦ R u_het(−x) on [0, X]."""

    profile: object
    X: float
    bc_residual: float
    ode_residual: float

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        return self.profile(x)


@dataclass
class FrontLoop:
    """Fronts sampled along a continuation loop, s rescaled to [0, 1]."""

    s: np.ndarray
    fronts: list[PatternedFront]
    closed: bool
    truncated: bool = False
    reason: str = ""
    offending_s: float | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def samples(self) -> list[tuple[float, PatternedFront]]:
        return list(zip(self.s, self.fronts, strict=True))

    @property
    def psi(self) -> np.ndarray:
        return np.array([f.psi for f in self.fronts])

    @property
    def mu(self) -> np.ndarray:
        return np.array([f.mu for f in self.fronts])

    @property
    def varpi(self) -> np.ndarray:
        return np.array([f.varpi for f in self.fronts])

    @property
    def sigma_min(self) -> np.ndarray:
        return np.array([f.sigma_min for f in self.fronts])

    @property
    def max_phase_gap(self) -> float:
        return float(np.max(circle_distance(self.psi[1:], self.psi[:-1])))

    def phase_loop(self) -> PhaseLoop:
        return PhaseLoop(
            s=self.s,
            psi=self.psi,
            mu=self.mu,
            closed=self.closed,
            varpi=self.varpi,
            exit_offset=np.array([f.exit_offset for f in self.fronts]),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "s": self.s,
                "mu": self.mu,
                "varpi": self.varpi,
                "psi": self.psi,
                "sigma_min": self.sigma_min,
                "tail_amplitude": [f.tail_amplitude for f in self.fronts],
                "X": [f.X for f in self.fronts],
            }
        )


def check_delta(delta: float, alpha: float, periods: float) -> None:
    """δ must dominate the truncation error exp(−2πα·periods)."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    floor = 10.0 * np.exp(-TWO_PI * alpha * periods)
    if delta <= floor:
        raise FrontError(
            f"delta={delta:.3g} is not above the truncation floor {floor:.3g} "
            f"(alpha={alpha:.4g}, {periods:g} periods); increase X or delta"
        )


def glue_front_guess(
    orbit: PeriodicOrbit,
    X: float,
    psi: float,
    center: float | None = None,
    width: float | None = None,
):
    """½(1 − tanh) envelope times the wave train u_wt(ϖx + ψ) on [−X, 0]."""
    center = -X / 3.0 if center is None else center
    width = orbit.period / 3.0 if width is None else width

    def guess(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        envelope = 0.5 * (1.0 - np.tanh((x - center) / width))
        return envelope * orbit(orbit.varpi * x + psi)

    return guess


def unstable_basis(system: ReversibleSystem, mu: float) -> np.ndarray:
    """Orthonormal basis of the range of P_u(μ)ᵀ, fixed along a loop."""
    return linalg.orth(system.spectral_projector(mu, "unstable").T)


def front_problem(
    system: ReversibleSystem,
    p: np.ndarray,
    frame: FloquetFrame,
    basis: np.ndarray,
    sign: float,
    delta: float,
    intervals: int = 128,
    degree: int = 4,
) -> CollocationProblem:
    """Coupled wave-train, phase-segment and front problem with p = (ϖ, φ, μ, X).

    The Floquet frame is frozen at the phase it was computed for; callers
    refresh it after φ moves.
    """
    B = system.reverser.fix_constraints()
    center = frame.center_left.T
    fiber_scale = float(frame.unstable_left @ frame.unstable_right)
    if abs(fiber_scale) < 1e-12:
        raise FrontError("unstable Floquet vectors are degenerate at this phase")

    def rhs(t, U, p):
        varpi, phi, mu, length = p
        return np.concatenate(
            [
                np.pi / varpi * system(U[WAVE], mu),
                phi / varpi * system(U[SEGMENT], mu),
                length * system(U[FRONT], mu),
            ]
        )

    def rhs_jacobian(t, U, p):
        varpi, phi, mu, length = p
        return linalg.block_diag(
            np.pi / varpi * system.jacobian(U[WAVE], mu),
            phi / varpi * system.jacobian(U[SEGMENT], mu),
            length * system.jacobian(U[FRONT], mu),
        )

    def bc(ua, ub, p, q):
        deviation = ua[FRONT] - ub[SEGMENT]
        return np.concatenate(
            [
                B @ ua[WAVE],
                B @ ub[WAVE],
                ua[SEGMENT] - ua[WAVE],
                system.unstable_rows(p[MU], basis) @ ub[FRONT],
                center @ deviation,
                [frame.stable_left @ deviation],
                [frame.unstable_left @ deviation / fiber_scale - sign * delta],
            ]
        )

    return CollocationProblem(
        rhs=rhs,
        bc=bc,
        dim=12,
        n_conditions=14,
        p=np.asarray(p, dtype=float),
        free=(VARPI, PHI),
        interval=(0.0, 1.0),
        intervals=intervals,
        degree=degree,
        rhs_jacobian=rhs_jacobian,
        name=f"front[{system.name}]",
    )


def _coupled_guess(orbit: PeriodicOrbit, front, phi: float, X: float):
    def guess(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.vstack([orbit(np.pi * t), orbit(phi * t), front(-X + X * t)])

    return guess


def _orbit_from_coupled(
    system: ReversibleSystem,
    profile,
    p: np.ndarray,
    template: PeriodicOrbit,
    tol: float = 1e-12,
) -> PeriodicOrbit:
    half = ComponentProfile(profile, WAVE, 0.0, np.pi)
    orbit = PeriodicOrbit(
        system=system,
        mu=float(p[MU]),
        varpi=float(p[VARPI]),
        half=half,
        kappa=float(half(0.0)[template.pin_index]),
        pin_index=template.pin_index,
        alpha_min=template.alpha_min,
    )
    return floquet_analysis(system, orbit, tol)


def _front_from_solution(
    system: ReversibleSystem,
    solution: BvpSolution,
    template: PeriodicOrbit,
    basis: np.ndarray,
    sign: float,
    delta: float,
    epsilon_fraction: float,
) -> PatternedFront:
    varpi, phi, mu, X = (float(v) for v in solution.p)
    profile = solution.profile
    orbit = _orbit_from_coupled(system, profile, solution.p, template)
    front = ComponentProfile(profile, FRONT, -X, X)
    deviation = front(-X) - ComponentProfile(profile, SEGMENT, 0.0, 1.0)(1.0)
    epsilon = epsilon_fraction * orbit.amplitude
    result = PatternedFront(
        mu=mu,
        orbit=orbit,
        profile=front,
        X=X,
        psi=float(wrap(phi + varpi * X)),
        exit_phase=float(wrap(phi)),
        delta=delta,
        tail_amplitude=float(np.linalg.norm(deviation)),
        sigma_min=solution.sigma_min,
        bc_residual=float(np.max(np.abs(solution.problem.conditions(solution.z)))),
        epsilon=epsilon,
        sign=sign,
        solution=solution,
        unstable_basis=basis,
        diagnostics=list(orbit.diagnostics),
    )
    result.exit_offset = neighbourhood_exit(
        front, OrbitNeighbourhood(orbit), epsilon, -X, 0.0
    )
    return result


def solve_front(
    system: ReversibleSystem,
    orbit: PeriodicOrbit,
    mu: float | None = None,
    guess=None,
    X: float | None = None,
    periods: float = 6.0,
    delta: float = 1e-3,
    psi_guess: float = 0.0,
    sign: float | None = None,
    intervals: int = 128,
    tol: float = 1e-10,
    epsilon_fraction: float = 0.1,
    refinements: int = 4,
    degree: int = 4,
    max_halvings: int = 8,
) -> PatternedFront:
    """Solve for a patterned front leaving ``orbit``.

    ``guess`` maps x ∈ [−X, 0] to states; by default the glued tanh
    envelope with asymptotic phase ``psi_guess``. Without ``sign`` both
    sides of the unstable fiber are tried. The Floquet frame is recomputed
    at the converged exit phase until the phase settles.
    """
    mu = orbit.mu if mu is None else float(mu)
    if abs(mu - orbit.mu) > 1e-12:
        raise ValueError(f"orbit was computed at mu={orbit.mu}, not {mu}")
    if orbit.floquet is None:
        floquet_analysis(system, orbit)
    if not orbit.hyperbolic:
        raise FrontError(f"wave train at mu={mu:g} is not hyperbolic (alpha={orbit.alpha:.3e})")
    X = periods * orbit.period if X is None else float(X)
    check_delta(delta, orbit.alpha, X / orbit.period)
    guess = guess or glue_front_guess(orbit, X, psi_guess)

    phi = float(np.mod(psi_guess - orbit.varpi * X + np.pi, TWO_PI) - np.pi)
    frame = floquet_frame(orbit, phi)
    basis = unstable_basis(system, mu)
    if sign is None:
        lean = float(frame.unstable_left @ (guess(np.array([-X]))[:, 0] - orbit(phi)))
        if abs(lean) < 1e-3 * delta:
            lean = -float(frame.unstable_right @ orbit(phi))
        signs = (1.0, -1.0) if lean >= 0 else (-1.0, 1.0)
    else:
        signs = (float(np.sign(sign)),)

    p = np.array([orbit.varpi, phi, mu, X])
    failure: Exception | None = None
    for side in signs:
        problem = front_problem(system, p, frame, basis, side, delta, intervals, degree)
        try:
            solution = solve_bvp(
                problem, _coupled_guess(orbit, guess, phi, X), tol, max_halvings=max_halvings
            )
        except (NewtonError, SingularJacobianError) as exc:
            failure = exc
            continue
        for _ in range(refinements):
            current = float(solution.p[PHI])
            if circle_distance(current, frame.theta) < 1e-10:
                break
            wave = _orbit_from_coupled(system, solution.profile, solution.p, orbit)
            frame = floquet_frame(wave, current)
            problem = front_problem(
                system, solution.p, frame, basis, side, delta, intervals, degree
            )
            solution = solve_bvp(problem, solution, tol, max_halvings=max_halvings)
        front = _front_from_solution(
            system, solution, orbit, basis, side, delta, epsilon_fraction
        )
        asymptotic_phase(front)
        return front
    raise FrontError(f"front solve failed on both sides of the unstable fiber: {failure}")


def fit_phase(
    orbit: PeriodicOrbit,
    profile,
    start: float,
    stop: float,
    samples: int = 64,
    grid: int = 256,
) -> float:
    """Least-squares θ with profile(x) ≈ u_wt(ϖx + θ) on [start, stop]."""
    xs = np.linspace(start, stop, samples)
    states = np.asarray(profile(xs))

    def energy(theta: float) -> float:
        return float(np.sum((states - orbit(orbit.varpi * xs + theta)) ** 2))

    def gradient(theta: float) -> float:
        phases = orbit.varpi * xs + theta
        return float(-2.0 * np.sum((states - orbit(phases)) * orbit.tangent(phases)))

    thetas = np.linspace(0.0, TWO_PI, grid, endpoint=False)
    best = float(thetas[int(np.argmin([energy(t) for t in thetas]))])
    lo, hi = best - TWO_PI / grid, best + TWO_PI / grid
    if gradient(lo) * gradient(hi) < 0:
        best = brentq(gradient, lo, hi, xtol=1e-14)
    return float(wrap(best))


def asymptotic_phase(front: PatternedFront) -> float:
    """ψ of the front; records a least-squares re-estimate and warns on disagreement."""
    period = front.orbit.period
    fitted = fit_phase(front.orbit, front.profile, -front.X, -front.X + period)
    discrepancy = float(circle_distance(fitted, front.psi))
    front.phase_fit = fitted
    front.phase_discrepancy = discrepancy
    scale = np.mean(np.linalg.norm(front.orbit.tangent(np.linspace(0, TWO_PI, 64)), axis=0))
    estimate = front.tail_amplitude * np.exp(TWO_PI * front.orbit.alpha) / scale
    if discrepancy > 10.0 * estimate:
        message = (
            f"phase fit {fitted:.6f} disagrees with psi={front.psi:.6f} by {discrepancy:.2e} "
            f"(truncation estimate {estimate:.2e})"
        )
        warn(message)
        front.diagnostics.append(Diagnostic(message))
    return front.psi


def regularity_diagnostic(front: PatternedFront) -> float:
    """σ_min of the front linearization with μ appended as an unknown."""
    if front.solution is None:
        raise ValueError("front has no collocation solution")
    return jacobian_regularity(front.solution, extra=(MU,))


def patterned_back(front: PatternedFront) -> PatternedBack:
    """Reflect the front; its left end lies in the unstable eigenspace of 0."""
    R = front.orbit.system.reverser.matrix

    def profile(x: float | np.ndarray) -> np.ndarray:
        return R @ front.profile(-np.asarray(x, dtype=float))

    system = front.orbit.system
    P_s = system.spectral_projector(front.mu, "stable")
    xs = np.linspace(0.0, front.X, 33)
    slopes = -R @ front.profile.derivative(-xs)
    field_values = np.array([system(u, front.mu) for u in profile(xs).T]).T
    return PatternedBack(
        profile=profile,
        X=front.X,
        bc_residual=float(np.max(np.abs(P_s @ profile(0.0)))),
        ode_residual=float(np.max(np.abs(slopes - field_values))),
    )


def _phase_of(p: np.ndarray) -> float:
    return float(p[PHI] + p[VARPI] * p[LENGTH])


def continue_front_loop(
    system: ReversibleSystem,
    front0: PatternedFront,
    config: StepConfig | None = None,
    phase_gap: float = np.pi / 2,
    sigma_threshold: float = 1e-8,
    epsilon_fraction: float = 0.1,
    direction: int = 1,
) -> FrontLoop:
    """Continue the coupled front problem in μ around its closed loop.

    After every accepted point the Floquet frame is recomputed at the new
    exit phase, and φ is moved back to within π of its starting value by a
    full period so that the loop closes on the same sheet. Steps whose
    asymptotic phase moves by more than ``phase_gap`` are retried shorter.
    """
    if front0.solution is None or front0.unstable_basis is None:
        raise ValueError("front has no collocation solution to continue")
    config = replace(config or StepConfig(), detect_closure=True, direction=direction)
    if config.min_arclength <= 0:
        config = replace(config, min_arclength=20 * config.step)
    anchor = float(front0.solution.p[PHI])
    basis, sign, delta = front0.unstable_basis, front0.sign, front0.delta

    def refresh(problem: CollocationProblem, z: np.ndarray):
        free = (*problem.free, MU)
        nodes, stages, p = problem.unpack(z, free)
        profile = CollocationProfile(problem.mesh, nodes, stages, problem.tableau)
        wave = _orbit_from_coupled(system, profile, p, front0.orbit)
        turns = int(np.round((p[PHI] - anchor) / TWO_PI))
        if turns:
            p = p.copy()
            p[PHI] -= TWO_PI * turns
            nodes = nodes.copy()
            stages = stages.copy()
            nodes[:, SEGMENT] = wave(p[PHI] * problem.mesh).T
            points = wave(p[PHI] * problem.stage_points.ravel())
            slopes = np.array([system(u, p[MU]) for u in points.T]) * p[PHI] / p[VARPI]
            stages[:, :, SEGMENT] = slopes.reshape(stages.shape[0], stages.shape[1], 4)
        frame = floquet_frame(wave, p[PHI])
        new_problem = front_problem(
            system, p, frame, basis, sign, delta, problem.intervals, problem.degree
        ).with_changes(mesh=problem.mesh)
        z_new = np.concatenate([nodes.ravel(), stages.ravel(), p[list(free)]])
        return new_problem, z_new

    def accept(previous: np.ndarray, trial: np.ndarray) -> bool:
        return circle_distance(_phase_of(previous), _phase_of(trial)) <= phase_gap

    offending: list[float] = []

    def irregular(point, branch: Branch) -> bool:
        if point.solution.sigma_min < sigma_threshold:
            offending.append(point.s)
            return True
        return False

    branch = continue_branch(
        front0.solution.problem,
        front0.solution,
        MU,
        config,
        stop=irregular,
        refresh=refresh,
        accept=accept,
    )
    arclength = branch.arclength
    total = arclength[-1] if arclength[-1] > 0 else 1.0
    fronts = [
        _front_from_solution(
            system, point.solution, front0.orbit, basis, sign, delta, epsilon_fraction
        )
        for point in branch.points
    ]
    loop = FrontLoop(
        s=arclength / total,
        fronts=fronts,
        closed=branch.closed,
        truncated=branch.truncated or bool(offending),
        reason=branch.reason,
        offending_s=offending[0] / total if offending else None,
    )
    for note in branch.notes:
        loop.diagnostics.append(Diagnostic(note))
    if offending:
        loop.reason = f"regularity lost (sigma_min < {sigma_threshold:g})"
        loop.diagnostics.append(
            Diagnostic(f"{loop.reason} at s={loop.offending_s:.6g}", fatal=True)
        )
    elif not loop.closed:
        loop.diagnostics.append(Diagnostic(f"loop did not close: {branch.reason}", fatal=True))
    if config.verbose:
        console.print(
            f"[dim]front loop: {len(fronts)} samples, closed={loop.closed}, "
            f"max phase gap {loop.max_phase_gap:.3f}[/dim]"
        )
    return loop
