"""Symmetric wave trains, their Floquet structure and local families.

A wave train is computed on its half period: with θ = ϖx the profile solves
u' = f(u, μ)/ϖ on [0, π] with u(0), u(π) ∈ Fix R, and the full orbit follows
from u(2π − θ) = R u(θ).
"""

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.optimize import brentq, fsolve
from scipy.spatial import cKDTree

from .collocation import BvpSolution, CollocationProblem, solve_bvp
from .console import warn
from .constants import TWO_PI
from .continuation import Branch, StepConfig, continue_branch
from .flow import variational_flow
from .models import Diagnostic
from .systems import ReversibleSystem

VARPI, MU, KAPPA = 0, 1, 2


class TrivialOrbitError(RuntimeError):
    """Raised when the wave-train solve collapses onto an equilibrium."""

    def __init__(self, amplitude: float):
        self.amplitude = amplitude
        super().__init__(f"trivial orbit: amplitude {amplitude:.3e} below the minimum")


@dataclass
class FloquetData:
    """Monodromy spectrum and Floquet vectors at phase 0."""

    monodromy: np.ndarray
    multipliers: np.ndarray
    alpha: float
    stable_right: np.ndarray
    unstable_right: np.ndarray
    stable_left: np.ndarray
    unstable_left: np.ndarray
    center_left: np.ndarray
    cluster: np.ndarray

    @property
    def determinant(self) -> float:
        return float(np.real(np.prod(self.multipliers)))


@dataclass
class FloquetFrame:
    """Floquet directions transported to a phase θ of the orbit."""

    theta: float
    point: np.ndarray
    center_left: np.ndarray
    stable_left: np.ndarray
    unstable_left: np.ndarray
    unstable_right: np.ndarray


@dataclass
class PeriodicOrbit:
    """A symmetric wave train u_wt(θ), 2π-periodic, with wavenumber ϖ."""

    system: ReversibleSystem
    mu: float
    varpi: float
    half: object
    kappa: float
    pin_index: int = 0
    floquet: FloquetData | None = None
    alpha_min: float = 1e-4
    solution: BvpSolution | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __call__(self, theta: float | np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        scalar = theta.ndim == 0
        theta = np.mod(np.atleast_1d(theta), TWO_PI)
        mirrored = theta > np.pi
        values = np.asarray(self.half(np.where(mirrored, TWO_PI - theta, theta)))
        if values.ndim == 1:
            values = values[:, None]
        values = values.copy()
        values[:, mirrored] = self.system.reverser.matrix @ values[:, mirrored]
        return values[:, 0] if scalar else values

    def tangent(self, theta: float | np.ndarray) -> np.ndarray:
        """du_wt/dθ = f(u_wt, μ)/ϖ."""
        values = self(theta)
        if values.ndim == 1:
            return self.system(values, self.mu) / self.varpi
        return np.array([self.system(u, self.mu) for u in values.T]).T / self.varpi

    @property
    def period(self) -> float:
        return TWO_PI / self.varpi

    @property
    def alpha(self) -> float:
        return float("nan") if self.floquet is None else self.floquet.alpha

    @property
    def hyperbolic(self) -> bool:
        return self.floquet is not None and self.floquet.alpha >= self.alpha_min

    def samples(self, count: int = 512) -> np.ndarray:
        return self(np.linspace(0.0, TWO_PI, count, endpoint=False))

    @property
    def amplitude(self) -> float:
        values = self.samples(256)
        return float(0.5 * np.max(values.max(axis=1) - values.min(axis=1)))

    @property
    def symmetry_residual(self) -> float:
        u0 = self(0.0)
        return float(np.max(np.abs(u0 - self.system.reverser.matrix @ u0)))

    def to_dict(self) -> dict[str, object]:
        data: dict[str, object] = {
            "system": self.system.name,
            "mu": self.mu,
            "varpi": self.varpi,
            "kappa": self.kappa,
            "amplitude": self.amplitude,
            "alpha": self.alpha,
            "hyperbolic": self.hyperbolic,
            "symmetry_residual": self.symmetry_residual,
        }
        if self.floquet is not None:
            data["multipliers_real"] = [float(v) for v in self.floquet.multipliers.real]
            data["multipliers_imag"] = [float(v) for v in self.floquet.multipliers.imag]
            data["determinant"] = self.floquet.determinant
        return data


def galerkin_ansatz(
    mu: float, b: float, varpi: float = 1.0, guess: tuple[float, float] = (0.3, 1.0)
) -> tuple[float, float]:
    """Mean and first-harmonic amplitudes (c₀, A) of u₁ ≈ c₀ + A cos(ϖx) for sh23."""

    def equations(x: np.ndarray) -> np.ndarray:
        c0, A = x
        return np.array(
            [
                -(1.0 + mu) * c0 + b * (c0**2 + A**2 / 2.0) - (c0**3 + 1.5 * c0 * A**2),
                -((1.0 - varpi**2) ** 2 + mu) * A
                + 2.0 * b * c0 * A
                - (3.0 * c0**2 * A + 0.75 * A**3),
            ]
        )

    c0, A = fsolve(equations, np.asarray(guess, dtype=float), xtol=1e-12)
    return float(c0), float(abs(A))


def cosine_guess(c0: float, A: float, varpi: float):
    """Half-period profile of u₁ = c₀ + A cos θ and its x-derivatives."""

    def guess(theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array(
            [
                c0 + A * np.cos(theta),
                -A * varpi * np.sin(theta),
                -A * varpi**2 * np.cos(theta),
                A * varpi**3 * np.sin(theta),
            ]
        )

    return guess


def wave_train_problem(
    system: ReversibleSystem,
    mu: float,
    varpi: float,
    kappa: float,
    pin_index: int = 0,
    intervals: int = 64,
    degree: int = 4,
) -> CollocationProblem:
    """Half-period BVP with parameters p = (ϖ, μ, κ); ϖ is free."""
    R = system.reverser.matrix
    if abs(R[pin_index, pin_index] - 1.0) > 1e-12:
        raise ValueError(f"pinned coordinate {pin_index} is not fixed by the reverser")
    B = system.reverser.fix_constraints()

    def rhs(x, u, p):
        return system(u, p[MU]) / p[VARPI]

    def rhs_jacobian(x, u, p):
        return system.jacobian(u, p[MU]) / p[VARPI]

    def bc(ua, ub, p, q):
        return np.concatenate([B @ ua, B @ ub, [ua[pin_index] - p[KAPPA]]])

    return CollocationProblem(
        rhs=rhs,
        bc=bc,
        dim=4,
        n_conditions=5,
        p=np.array([varpi, mu, kappa]),
        free=(VARPI,),
        interval=(0.0, np.pi),
        intervals=intervals,
        degree=degree,
        rhs_jacobian=rhs_jacobian,
        name=f"wave-train[{system.name}]",
    )


def find_wave_train(
    system: ReversibleSystem,
    mu: float,
    guess,
    varpi: float,
    kappa: float | None = None,
    pin_index: int = 0,
    tol: float = 1e-10,
    intervals: int = 64,
    degree: int = 4,
    max_halvings: int = 8,
    min_amplitude: float = 1e-3,
    alpha_min: float = 1e-4,
    cluster_tol: float = 1e-6,
    monodromy_tol: float = 1e-12,
) -> PeriodicOrbit:
    """Solve for a symmetric wave train near ``guess`` (a half-period profile in θ)."""
    if varpi <= 0:
        raise ValueError(f"wavenumber guess must be positive, got {varpi}")
    if kappa is None:
        kappa = float(np.asarray(guess(np.array([0.0])))[pin_index, 0])
    problem = wave_train_problem(system, mu, varpi, kappa, pin_index, intervals, degree)
    solution = solve_bvp(problem, guess, tol, max_halvings=max_halvings)
    return _orbit_from_solution(
        system, solution, pin_index, min_amplitude, alpha_min, cluster_tol, monodromy_tol
    )


def _orbit_from_solution(
    system: ReversibleSystem,
    solution: BvpSolution,
    pin_index: int,
    min_amplitude: float = 1e-3,
    alpha_min: float = 1e-4,
    cluster_tol: float = 1e-6,
    monodromy_tol: float = 1e-12,
) -> PeriodicOrbit:
    orbit = PeriodicOrbit(
        system=system,
        mu=float(solution.p[MU]),
        varpi=float(solution.p[VARPI]),
        half=solution.profile,
        kappa=float(solution.p[KAPPA]),
        pin_index=pin_index,
        alpha_min=alpha_min,
        solution=solution,
    )
    if orbit.amplitude < min_amplitude:
        raise TrivialOrbitError(orbit.amplitude)
    orbit.floquet = floquet_analysis(system, orbit, monodromy_tol, cluster_tol).floquet
    if not orbit.hyperbolic:
        message = f"wave train at mu={orbit.mu:g} is not hyperbolic (alpha={orbit.alpha:.3e})"
        warn(message)
        orbit.diagnostics.append(Diagnostic(message))
    return orbit


def floquet_analysis(
    system: ReversibleSystem,
    orbit: PeriodicOrbit,
    tol: float = 1e-12,
    cluster_tol: float = 1e-6,
) -> PeriodicOrbit:
    """Attach monodromy, multipliers, α and Floquet vectors to ``orbit``."""
    u0 = orbit(0.0)
    _, monodromy = variational_flow(system, orbit.mu, u0, orbit.period, tol)
    values, left, right = linalg.eig(monodromy, left=True, right=True)

    magnitude = np.abs(values)
    unstable = int(np.argmax(magnitude))
    stable = int(np.argmin(magnitude))
    rest = [i for i in range(len(values)) if i not in (unstable, stable)]
    cluster = values[rest]

    def unit(v: np.ndarray) -> np.ndarray:
        v = np.real(v)
        return v / np.linalg.norm(v)

    v_s, v_u = unit(right[:, stable]), unit(right[:, unstable])
    floquet = FloquetData(
        monodromy=monodromy,
        multipliers=values,
        alpha=float(np.log(magnitude[unstable]) / TWO_PI),
        stable_right=v_s,
        unstable_right=v_u,
        stable_left=unit(left[:, stable]),
        unstable_left=unit(left[:, unstable]),
        center_left=linalg.null_space(np.vstack([v_s, v_u])),
        cluster=cluster,
    )
    if np.any(np.abs(cluster - 1.0) > cluster_tol) or abs(values[unstable].imag) > cluster_tol:
        message = "multiplier cluster at 1 is " + ", ".join(f"{v:.8g}" for v in cluster)
        warn(message)
        orbit.diagnostics.append(Diagnostic(message))
    orbit.floquet = floquet
    return orbit


def floquet_frame(orbit: PeriodicOrbit, theta: float, tol: float = 1e-12) -> FloquetFrame:
    """Floquet directions at phase θ: right vectors by DΦ, left vectors by DΦ^{-T}."""
    if orbit.floquet is None:
        raise ValueError("orbit has no Floquet data")
    theta = float(np.mod(theta, TWO_PI))
    floquet = orbit.floquet
    _, Y = variational_flow(orbit.system, orbit.mu, orbit(0.0), theta / orbit.varpi, tol)

    def transport_left(v: np.ndarray) -> np.ndarray:
        w = np.linalg.solve(Y.T, v)
        return w / np.linalg.norm(w, axis=0)

    unstable_right = Y @ floquet.unstable_right
    return FloquetFrame(
        theta=theta,
        point=orbit(theta),
        center_left=linalg.orth(np.linalg.solve(Y.T, floquet.center_left)),
        stable_left=transport_left(floquet.stable_left),
        unstable_left=transport_left(floquet.unstable_left),
        unstable_right=unstable_right / np.linalg.norm(unstable_right),
    )


def transversality_measure(
    half_map: np.ndarray,
    reverser: np.ndarray,
    f_p: np.ndarray,
    f_q: np.ndarray,
) -> float:
    """Sine of the largest principal angle between DΨ(Fix R ∩ Σ_p) and Fix R ∩ Σ_q.

    ``half_map`` is the linearized half-period flow; the sections are the
    hyperplanes orthogonal to f_p and f_q, and DΨ projects the image of the
    flow onto Σ_q along f_q. The measure is 0 exactly when the half map
    carries Fix R onto itself inside the section.
    """
    n = len(f_p)
    fix = linalg.null_space(reverser - np.eye(n), rcond=1e-10)

    def in_section(basis: np.ndarray, normal: np.ndarray) -> np.ndarray:
        coefficients = linalg.null_space((normal @ basis).reshape(1, -1))
        return basis @ coefficients

    source = in_section(fix, f_p)
    target = in_section(fix, f_q)
    projector = np.eye(n) - np.outer(f_q, f_q) / (f_q @ f_q)
    image = linalg.orth(projector @ half_map @ source)
    angles = linalg.subspace_angles(image, target)
    return float(np.sin(np.max(angles)))


def elementary_check(system: ReversibleSystem, orbit: PeriodicOrbit, tol: float = 1e-12) -> float:
    """Transversality of the half-period map to Fix R at q = u_wt(π)."""
    p, q = orbit(0.0), orbit(np.pi)
    f_p, f_q = system(p, orbit.mu), system(q, orbit.mu)
    if np.linalg.norm(f_p) < 1e-12 or np.linalg.norm(f_q) < 1e-12:
        raise ValueError("f vanishes on the orbit; not a periodic orbit")
    _, half_map = variational_flow(system, orbit.mu, p, np.pi / orbit.varpi, tol)
    return transversality_measure(half_map, system.reverser.matrix, f_p, f_q)


@dataclass
class OrbitFamily:
    """Wave trains along a continuation in κ or μ."""

    direction: str
    orbits: list[PeriodicOrbit]
    tangent_norm: float
    truncated: bool = False
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def kappa(self) -> np.ndarray:
        return np.array([o.kappa for o in self.orbits])

    @property
    def mu(self) -> np.ndarray:
        return np.array([o.mu for o in self.orbits])

    @property
    def varpi(self) -> np.ndarray:
        return np.array([o.varpi for o in self.orbits])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "kappa": self.kappa,
                "mu": self.mu,
                "varpi": self.varpi,
                "alpha": [o.alpha for o in self.orbits],
                "hyperbolic": [o.hyperbolic for o in self.orbits],
            }
        )


def family_tangent_norm(orbit: PeriodicOrbit, h: float = 1e-4, tol: float = 1e-10) -> float:
    """Max norm of ∂_κ u_per at the orbit by central differences in the pinned value."""
    if orbit.solution is None:
        raise ValueError("orbit was not computed by collocation")
    profiles = []
    for sign in (1.0, -1.0):
        problem = orbit.solution.problem.with_changes(
            p=np.array([orbit.varpi, orbit.mu, orbit.kappa + sign * h])
        )
        profiles.append(solve_bvp(problem, orbit.solution, tol))
    grid = np.linspace(0.0, np.pi, 129)
    derivative = (profiles[0](grid) - profiles[1](grid)) / (2.0 * h)
    return float(np.max(np.abs(derivative)))


def continue_family(
    system: ReversibleSystem,
    orbit: PeriodicOrbit,
    direction: str,
    value_range: tuple[float, float],
    config: StepConfig | None = None,
) -> OrbitFamily:
    """Continue the half-period problem in κ (μ fixed) or μ (κ fixed) across a range."""
    if direction not in ("kappa", "mu"):
        raise ValueError(f"direction must be 'kappa' or 'mu', got '{direction}'")
    if orbit.solution is None:
        raise ValueError("orbit was not computed by collocation")
    index = KAPPA if direction == "kappa" else MU
    lo, hi = sorted(value_range)
    current = orbit.solution.p[index]
    if not lo <= current <= hi:
        raise ValueError(f"range {lo}..{hi} does not contain the base value {current}")

    family = OrbitFamily(direction, [orbit], family_tangent_norm(orbit))
    if family.tangent_norm < 1e-6:
        message = f"family tangent nearly vanishes ({family.tangent_norm:.3e})"
        warn(message)
        family.diagnostics.append(Diagnostic(message))
    if lo == hi:
        return family

    config = config or StepConfig()
    legs: list[list[PeriodicOrbit]] = []
    for sign, bound in ((1, hi), (-1, lo)):
        if bound == current:
            legs.append([])
            continue
        leg_config = replace(config, direction=sign, detect_closure=False)

        def outside(point, branch, bound=bound, sign=sign) -> bool:
            return sign * (point.p[index] - bound) >= 0

        branch: Branch = continue_branch(
            orbit.solution.problem, orbit.solution, index, leg_config, stop=outside
        )
        leg = []
        for point in branch.points[1:]:
            if sign * (point.p[index] - bound) > 0:
                break
            member = _orbit_from_solution(system, point.solution, orbit.pin_index, 0.0)
            if not member.hyperbolic:
                family.truncated = True
                family.diagnostics.append(
                    Diagnostic(f"hyperbolicity lost at {direction}={point.p[index]:.6g}")
                )
                break
            leg.append(member)
        family.truncated = family.truncated or branch.truncated
        legs.append(leg)

    family.orbits = legs[1][::-1] + [orbit] + legs[0]
    return family


class PlateauError(RuntimeError):
    """Raised when a profile never enters the ε-neighbourhood of the wave train."""

    def __init__(self, epsilon: float, closest: float):
        self.epsilon = epsilon
        self.closest = closest
        super().__init__(
            f"profile never enters the {epsilon:.3g}-neighbourhood of the wave train "
            f"(closest approach {closest:.3g})"
        )


class OrbitNeighbourhood:
    """Nearest-point distance to a set of orbit samples (the wave train by default)."""

    def __init__(self, orbit: PeriodicOrbit | None = None, samples: int = 4096, points=None):
        clouds = []
        if orbit is not None:
            clouds.append(orbit.samples(samples).T)
        if points is not None:
            clouds.append(np.atleast_2d(points))
        if not clouds:
            raise ValueError("neighbourhood needs an orbit or explicit points")
        self.tree = cKDTree(np.vstack(clouds))

    def distance(self, states: np.ndarray) -> np.ndarray:
        """Distances for states given as columns (n, M) or a single n-vector."""
        states = np.asarray(states, dtype=float)
        distances, _ = self.tree.query(states.T if states.ndim == 2 else states)
        return np.atleast_1d(distances)


def neighbourhood_exit(
    profile,
    neighbourhood: OrbitNeighbourhood,
    epsilon: float,
    start: float,
    stop: float,
    density: float = 20.0,
) -> float:
    """First x after the first visit where the profile leaves the ε-neighbourhood.

    Returns ``stop`` when the profile stays inside until the end.
    """
    count = max(2, int(np.ceil((stop - start) * density)) + 1)
    grid = np.linspace(start, stop, count)
    excess = neighbourhood.distance(profile(grid)) - epsilon
    inside = excess < 0
    if not inside.any():
        raise PlateauError(epsilon, float(excess.min() + epsilon))
    first = int(np.argmax(inside))
    outside = np.nonzero(~inside[first:])[0]
    if len(outside) == 0:
        return float(stop)
    j = first + int(outside[0])

    def crossing(x: float) -> float:
        return float(neighbourhood.distance(profile(np.array([x])))[0] - epsilon)

    return float(brentq(crossing, grid[j - 1], grid[j], xtol=1e-12))
