"""Symmetric localized patterns: solves, plateau measurement, branches and comparison.

A localized state is computed on its half line [0, X_h] with u(0) ∈ Fix R
and u(X_h) in the stable eigenspace of 0; the full orbit is u(−x) = R u(x).
"""

from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.integrate import trapezoid
from scipy.stats import linregress

from .collocation import BvpSolution, CollocationProblem, NewtonError, solve_bvp
from .console import console, warn
from .constants import TWO_PI
from .continuation import Branch, StepConfig, continue_branch
from .fronts import PatternedFront, unstable_basis
from .models import Diagnostic, TopologyMismatchError
from .systems import ReversibleSystem
from .topology import ISOLAS, SNAKING, BranchPrediction, check_phi0
from .wavetrain import (
    OrbitNeighbourhood,
    PeriodicOrbit,
    PlateauError,
    neighbourhood_exit,
)

MU, MASS = 0, 1


class AmbiguousSymmetryError(RuntimeError):
    """Raised when u(0) is about as close to u_wt(0) as to u_wt(π)."""

    def __init__(self, d0: float, dpi: float):
        self.d0 = d0
        self.dpi = dpi
        super().__init__(
            f"ambiguous symmetry class: distance {d0:.4g} to u_wt(0), {dpi:.4g} to u_wt(pi)"
        )


@dataclass
class LocalizedState:
    """Half profile of a φ₀-symmetric localized state, with its measured plateau."""

    mu: float
    phi0: float
    profile: object
    X_h: float
    orbit: PeriodicOrbit
    L: float = float("nan")
    epsilon: float = 0.0
    front_end: float = 0.0
    solution: BvpSolution | None = None
    residual: float = 0.0
    symmetry_residual: float = 0.0
    decay_residual: float = 0.0
    containment: float | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        """Full orbit on [−X_h, X_h]."""
        x = np.asarray(x, dtype=float)
        values = np.asarray(self.profile(np.abs(x)))
        R = self.orbit.system.reverser.matrix
        if values.ndim == 1:
            return R @ values if x < 0 else values
        values = values.copy()
        values[:, x < 0] = R @ values[:, x < 0]
        return values

    def to_dict(self) -> dict[str, object]:
        return {
            "mu": self.mu,
            "phi0": self.phi0,
            "L": self.L,
            "epsilon": self.epsilon,
            "X_h": self.X_h,
            "residual": self.residual,
            "symmetry_residual": self.symmetry_residual,
            "decay_residual": self.decay_residual,
            "containment": self.containment,
        }


@dataclass
class LocalizedBranch:
    """(μ, L) samples of a continued branch of localized states."""

    phi0: float
    mu: np.ndarray
    L: np.ndarray
    arclength: np.ndarray
    residual: np.ndarray
    sigma_min: np.ndarray
    mode: str = SNAKING
    closed: bool = False
    truncated: bool = False
    reason: str = ""
    states: list[LocalizedState] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __post_init__(self):
        for name in ("mu", "L", "arclength", "residual", "sigma_min"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    def __len__(self) -> int:
        return len(self.mu)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "phi0": self.phi0,
                "index": np.arange(len(self.mu)),
                "s_or_arclength": self.arclength,
                "mu": self.mu,
                "L": self.L,
                "residual": self.residual,
                "sigma_min": self.sigma_min,
            }
        )


@dataclass
class ComparisonReport:
    """Deviations of computed branches from their predictions, and the decay fit."""

    phi0: float
    mode: str
    winding: int
    deviations: pd.DataFrame
    windows: pd.DataFrame
    beta_hat: float
    fit_residual: float
    exact: bool = False
    topology_agrees: bool = True
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.topology_agrees and (self.exact or self.beta_hat > 0)

    @property
    def monotone(self) -> bool:
        """Per-window maximum deviation decreases from window to window."""
        values = self.windows["max_deviation"].to_numpy()
        return bool(np.all(np.diff(values) < 0))

    def to_dict(self) -> dict[str, object]:
        return {
            "phi0": self.phi0,
            "mode": self.mode,
            "winding": self.winding,
            "beta_hat": self.beta_hat,
            "fit_residual": self.fit_residual,
            "exact": self.exact,
            "topology_agrees": self.topology_agrees,
            "monotone": self.monotone,
            "passed": self.passed,
            "points": len(self.deviations),
            "max_deviation": float(self.deviations["distance"].max()),
            "window_L": [float(v) for v in self.windows["L"]],
            "window_max_deviation": [float(v) for v in self.windows["max_deviation"]],
        }


def fit_decay_rate(L: Sequence[float], deviation: Sequence[float]) -> tuple[float, float]:
    """β̂ and 1 − R² of the log-linear fit deviation ≈ C·e^{−β̂L}."""
    L = np.asarray(L, dtype=float)
    deviation = np.asarray(deviation, dtype=float)
    if len(L) < 2:
        raise ValueError(f"need at least two points to fit a decay rate, got {len(L)}")
    if np.any(deviation <= 0):
        raise ValueError("deviations must be positive for a log-linear fit")
    fit = linregress(L, np.log(deviation))
    return float(-fit.slope), float(1.0 - fit.rvalue**2)


def plateau_mass(orbit: PeriodicOrbit, samples: int = 512) -> float:
    """Mean of |u_wt|² per unit length."""
    return float(np.mean(np.sum(orbit.samples(samples) ** 2, axis=0)))


def _stable_tail(system: ReversibleSystem, mu: float, start: np.ndarray):
    values, vectors = linalg.eig(system.jacobian(np.zeros(4), mu))
    mask = values.real < 0
    coefficients = linalg.solve(vectors, start.astype(complex))
    coefficients[~mask] = 0.0

    def tail(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.real(vectors @ (coefficients[:, None] * np.exp(values[:, None] * t[None, :])))

    return tail


def glue_localized_guess(
    front: PatternedFront,
    phi0: float,
    L_target: float,
    tail_periods: float = 6.0,
):
    """Wave train at phase ϖx + φ₀, then the front, then the linear stable tail.

    The front is placed at the shift matching its asymptotic phase to the
    plateau phase, with the index n chosen so the plateau length is closest to
    ``L_target``. Returns ``(guess, front_end, X_h)``.
    """
    phi0 = check_phi0(phi0)
    orbit = front.orbit
    varpi = orbit.varpi
    n = int(np.round((varpi * (L_target - front.exit_offset) - front.psi + phi0) / TWO_PI))
    front_end = (front.psi + TWO_PI * n - phi0) / varpi
    if front_end - front.X < 2 * orbit.period:
        raise ValueError(
            f"target L={L_target:g} leaves less than two periods of plateau; increase it"
        )
    X_h = front_end + tail_periods * orbit.period
    tail = _stable_tail(orbit.system, front.mu, np.asarray(front.profile(0.0)))

    def guess(x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        local = x - front_end
        plateau = local < -front.X
        inside = (~plateau) & (local <= 0)
        beyond = local > 0
        values = np.empty((4, len(x)))
        if plateau.any():
            values[:, plateau] = orbit(varpi * x[plateau] + phi0)
        if inside.any():
            values[:, inside] = front.profile(local[inside])
        if beyond.any():
            values[:, beyond] = tail(local[beyond])
        return values

    return guess, front_end, X_h


def localized_problem(
    system: ReversibleSystem,
    mu: float,
    X_h: float,
    basis: np.ndarray,
    mass: float | None = None,
    intervals: int = 256,
    degree: int = 4,
    mesh: np.ndarray | None = None,
) -> CollocationProblem:
    """Half-line problem; with ``mass`` the integral pin ∫|u|² = mass frees μ."""
    B = system.reverser.fix_constraints()
    pinned = mass is not None

    def rhs(x, u, p):
        return system(u, p[MU])

    def rhs_jacobian(x, u, p):
        return system.jacobian(u, p[MU])

    def integrand(x, u, p):
        return np.array([u @ u])

    def bc(ua, ub, p, q):
        rows = [B @ ua, system.unstable_rows(p[MU], basis) @ ub]
        if pinned:
            rows.append([q[0] - p[MASS]])
        return np.concatenate(rows)

    return CollocationProblem(
        rhs=rhs,
        bc=bc,
        dim=4,
        n_conditions=5 if pinned else 4,
        p=np.array([mu, mass if pinned else 0.0]),
        free=(MU,) if pinned else (),
        interval=(0.0, X_h),
        intervals=intervals,
        degree=degree,
        rhs_jacobian=rhs_jacobian,
        integrand=integrand if pinned else None,
        mesh=mesh,
        name=f"localized[{system.name}]",
    )


def solve_localized(
    system: ReversibleSystem,
    front: PatternedFront,
    phi0: float,
    L_target: float,
    guess=None,
    epsilon_fraction: float = 0.1,
    tail_periods: float = 6.0,
    intervals: int | None = None,
    tol: float = 1e-10,
    degree: int = 4,
    max_halvings: int = 8,
) -> LocalizedState:
    """Solve for the φ₀-symmetric state whose plateau length is pinned near ``L_target``.

    The pin fixes ∫|u|² to the plateau mass per unit length times L plus the
    mass of the front tail; μ is the free parameter.
    """
    phi0 = check_phi0(phi0)
    glued, front_end, X_h = glue_localized_guess(front, phi0, L_target, tail_periods)
    guess = guess or glued
    orbit = front.orbit
    density = plateau_mass(orbit)
    xs = np.linspace(-front.X, 0.0, 2001)
    front_mass = trapezoid(np.sum(np.asarray(front.profile(xs)) ** 2, axis=0), xs)
    mass = density * L_target + front_mass - density * (front.X + front.exit_offset)
    intervals = intervals or max(64, int(np.ceil(4 * X_h / orbit.period)) * 4)

    basis = unstable_basis(system, front.mu)
    problem = localized_problem(system, front.mu, X_h, basis, mass, intervals, degree)
    try:
        solution = solve_bvp(problem, guess, tol, max_halvings=max_halvings)
    except NewtonError as exc:
        other = "pi" if phi0 == 0.0 else "0"
        raise NewtonError(
            exc.history, f"{exc}; the glue phase may not match, try phi0={other}"
        ) from exc
    state = _state_from_solution(system, solution, orbit, phi0, epsilon_fraction, front_end)
    state.containment = containment_distance(state, front)
    if state.containment > state.epsilon:
        message = (
            f"state leaves the heteroclinic neighbourhood: distance {state.containment:.3g} "
            f"> epsilon {state.epsilon:.3g}"
        )
        warn(message)
        state.diagnostics.append(Diagnostic(message))
    try:
        found = phase_symmetry_class(state, orbit)
    except AmbiguousSymmetryError as exc:
        state.diagnostics.append(Diagnostic(str(exc)))
    else:
        if found != phi0:
            message = f"requested phi0={phi0:g} but the state is {found:g}-symmetric"
            warn(message)
            state.diagnostics.append(Diagnostic(message))
    return state


def _state_from_solution(
    system: ReversibleSystem,
    solution: BvpSolution,
    orbit: PeriodicOrbit,
    phi0: float,
    epsilon_fraction: float,
    front_end: float,
    basis: np.ndarray | None = None,
) -> LocalizedState:
    mu = float(solution.p[MU])
    a, b = solution.problem.interval
    u0, ub = solution(a), solution(b)
    epsilon = epsilon_fraction * orbit.amplitude
    state = LocalizedState(
        mu=mu,
        phi0=phi0,
        profile=solution.profile,
        X_h=b,
        orbit=orbit,
        epsilon=epsilon,
        front_end=front_end,
        solution=solution,
        residual=solution.residual_norm,
        symmetry_residual=float(np.max(np.abs(u0 - system.reverser.matrix @ u0))),
        decay_residual=float(np.max(np.abs(system.unstable_rows(mu, basis) @ ub))),
    )
    try:
        state.L = measure_plateau_length(state, orbit, epsilon)
    except PlateauError as exc:
        state.diagnostics.append(Diagnostic(str(exc), fatal=True))
    return state


def measure_plateau_length(
    state,
    orbit: PeriodicOrbit,
    epsilon: float,
    interval: tuple[float, float] | None = None,
) -> float:
    """Exit x of the first stay of the half profile in the ε-neighbourhood of the orbit.

    ``state`` is a LocalizedState or any profile; plain callables need ``interval``.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    profile = getattr(state, "profile", state)
    a, b = interval if interval is not None else profile.interval
    return neighbourhood_exit(profile, OrbitNeighbourhood(orbit), epsilon, a, b)


def phase_symmetry_class(state, orbit: PeriodicOrbit, ambiguity: float = 0.1) -> float:
    """0 or π, whichever wave-train point is nearer to u(0)."""
    profile = getattr(state, "profile", state)
    u0 = np.asarray(profile(0.0))
    d0 = float(np.linalg.norm(u0 - orbit(0.0)))
    dpi = float(np.linalg.norm(u0 - orbit(np.pi)))
    if abs(d0 - dpi) <= ambiguity * max(d0, dpi):
        raise AmbiguousSymmetryError(d0, dpi)
    return 0.0 if d0 < dpi else float(np.pi)


def containment_distance(
    state: LocalizedState, front: PatternedFront, samples: int = 2001
) -> float:
    """Largest distance of the state from the front, its reflection, the wave train and 0."""
    R = front.orbit.system.reverser.matrix
    xs = np.linspace(-front.X, 0.0, samples)
    front_points = np.asarray(front.profile(xs))
    cloud = np.vstack([front_points.T, (R @ front_points).T, np.zeros((1, 4))])
    neighbourhood = OrbitNeighbourhood(front.orbit, points=cloud)
    grid = np.linspace(0.0, state.X_h, samples)
    return float(neighbourhood.distance(np.asarray(state.profile(grid))).max())


def continue_localized_branch(
    system: ReversibleSystem,
    state: LocalizedState,
    mode: str = SNAKING,
    config: StepConfig | None = None,
    L_budget: float | None = None,
    epsilon_fraction: float = 0.1,
    direction: int = 1,
) -> LocalizedBranch:
    """Continue ``state`` in μ without the L pin.

    Snaking branches stop once the measured L reaches ``L_budget`` (by default
    the room left before the front runs into the end of the interval);
    isolas stop on closure.
    """
    if mode not in (ISOLAS, SNAKING):
        raise ValueError(f"mode must be '{ISOLAS}' or '{SNAKING}', got '{mode}'")
    if state.solution is None:
        raise ValueError("state has no collocation solution to continue")
    config = replace(config or StepConfig(), direction=direction, detect_closure=mode == ISOLAS)
    if mode == ISOLAS and config.min_arclength <= 0:
        config = replace(config, min_arclength=20 * config.step)
    if L_budget is None:
        L_budget = state.L + (state.X_h - state.front_end) - state.orbit.period

    base = state.solution.problem
    basis = unstable_basis(system, state.mu)
    problem = localized_problem(
        system, state.mu, state.X_h, basis, None, base.intervals, base.degree, base.mesh
    )
    start = BvpSolution(
        problem,
        problem.initial_vector(state.solution),
        problem.p,
        state.residual,
        state.solution.sigma_min,
    )
    states: dict[int, LocalizedState] = {}

    def measured(point) -> LocalizedState:
        key = id(point)
        if key not in states:
            states[key] = _state_from_solution(
                system,
                point.solution,
                state.orbit,
                state.phi0,
                epsilon_fraction,
                state.front_end,
                basis,
            )
        return states[key]

    def beyond_budget(point, branch: Branch) -> bool:
        return mode == SNAKING and measured(point).L >= L_budget

    branch = continue_branch(problem, start, MU, config, stop=beyond_budget)
    members = [measured(point) for point in branch.points]
    result = LocalizedBranch(
        phi0=state.phi0,
        mu=[m.mu for m in members],
        L=[m.L for m in members],
        arclength=branch.arclength,
        residual=[m.residual for m in members],
        sigma_min=branch.sigma_min,
        mode=mode,
        closed=branch.closed,
        truncated=branch.truncated,
        reason=branch.reason,
        states=members,
    )
    result.diagnostics.extend(Diagnostic(note) for note in branch.notes)
    if mode == ISOLAS and not branch.closed:
        result.diagnostics.append(Diagnostic(f"isola did not close: {branch.reason}"))
    if config.verbose:
        console.print(
            f"[dim]localized branch phi0={state.phi0:g}: {len(members)} points, "
            f"L in [{np.nanmin(result.L):.3f}, {np.nanmax(result.L):.3f}][/dim]"
        )
    return result


def _nearest_on_curve(points: np.ndarray, curve: np.ndarray) -> np.ndarray:
    """Offsets from each point to its nearest point on a polyline (both (M, 2))."""
    start, end = curve[:-1], curve[1:]
    segment = end - start
    length2 = np.maximum(np.sum(segment**2, axis=1), 1e-300)
    offsets = np.empty_like(points)
    for i, q in enumerate(points):
        t = np.clip(np.sum((q - start) * segment, axis=1) / length2, 0.0, 1.0)
        nearest = start + t[:, None] * segment
        gaps = q - nearest
        offsets[i] = gaps[int(np.argmin(np.sum(gaps**2, axis=1)))]
    return offsets


def compare_to_prediction(
    branches: LocalizedBranch | Sequence[LocalizedBranch],
    predictions: BranchPrediction | Sequence[BranchPrediction],
    exact_tol: float = 1e-12,
) -> ComparisonReport:
    """Nearest-point deviations in (L, μ) and the decay fit over windows of one period in L.

    Branches and predictions are paired in order. A closed branch against a
    snake (or the reverse) raises ``TopologyMismatchError``.
    """
    if isinstance(branches, LocalizedBranch):
        branches = [branches]
    if isinstance(predictions, BranchPrediction):
        predictions = [predictions]
    if len(branches) != len(predictions) or not branches:
        raise ValueError(
            f"need one prediction per branch, got {len(branches)} and {len(predictions)}"
        )

    rows = []
    for branch, prediction in zip(branches, predictions, strict=True):
        if branch.phi0 != prediction.phi0:
            raise ValueError(
                f"phi0 differs: branch {branch.phi0:g}, prediction {prediction.phi0:g}"
            )
        found = ISOLAS if branch.closed else SNAKING
        if found != prediction.mode:
            raise TopologyMismatchError(
                prediction.mode, found, f"phi0={branch.phi0:g}, {branch.reason or 'open'}"
            )
        curve = np.column_stack([prediction.measured_length(), prediction.mu])
        if prediction.closed and not np.allclose(curve[0], curve[-1]):
            curve = np.vstack([curve, curve[:1]])
        keep = np.isfinite(branch.L)
        points = np.column_stack([branch.L[keep], branch.mu[keep]])
        offsets = _nearest_on_curve(points, curve)
        rows.append(
            pd.DataFrame(
                {
                    "L": points[:, 0],
                    "mu": points[:, 1],
                    "dL": offsets[:, 0],
                    "dmu": offsets[:, 1],
                    "distance": np.hypot(offsets[:, 0], offsets[:, 1]),
                }
            )
        )
    deviations = pd.concat(rows, ignore_index=True)

    first = predictions[0]
    width = TWO_PI / float(np.mean(np.concatenate([p.varpi for p in predictions])))
    window = np.floor(deviations["L"].to_numpy() / width).astype(int)
    largest = deviations.assign(window=window).sort_values("distance").groupby("window").tail(1)
    windows = (
        largest.sort_values("window")
        .rename(columns={"distance": "max_deviation"})[["window", "L", "max_deviation"]]
        .reset_index(drop=True)
    )

    report = ComparisonReport(
        phi0=first.phi0,
        mode=first.mode,
        winding=first.winding,
        deviations=deviations,
        windows=windows,
        beta_hat=float("nan"),
        fit_residual=float("nan"),
    )
    if deviations["distance"].max() <= exact_tol:
        report.exact = True
        report.diagnostics.append(Diagnostic("branch coincides with the prediction; fit skipped"))
        return report
    usable = windows[windows["max_deviation"] > 0]
    if len(usable) < 2:
        message = f"only {len(usable)} window(s) of L with deviations; decay rate not fitted"
        warn(message)
        report.diagnostics.append(Diagnostic(message, fatal=True))
        return report
    report.beta_hat, report.fit_residual = fit_decay_rate(usable["L"], usable["max_deviation"])
    if report.beta_hat <= 0:
        report.diagnostics.append(
            Diagnostic(f"deviations do not decay (beta_hat={report.beta_hat:.4g})", fatal=True)
        )
    return report

