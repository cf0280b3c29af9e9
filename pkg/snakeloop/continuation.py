"""Pseudo-arclength continuation of collocation problems in one parameter."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .collocation import (
    BvpSolution,
    CollocationProblem,
    NewtonError,
    SingularJacobianError,
    newton,
    smallest_singular_value,
)
from .console import console


@dataclass
class StepConfig:
    """Step control for ``continue_branch``."""

    step: float = 0.02
    min_step: float = 1e-8
    max_step: float = 0.2
    grow: float = 1.3
    fast_iterations: int = 3
    max_points: int = 400
    newton_tol: float = 1e-10
    max_iterations: int = 10
    closure_tol: float = 1e-6
    detect_closure: bool = False
    min_arclength: float = 0.0
    direction: int = 1
    verbose: bool = False

    def __post_init__(self):
        for name in ("step", "min_step", "max_step", "newton_tol", "closure_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.min_step > self.step or self.step > self.max_step:
            raise ValueError(
                f"need min_step <= step <= max_step, got {self.min_step}, {self.step}, "
                f"{self.max_step}"
            )
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")


@dataclass
class BranchPoint:
    s: float
    solution: BvpSolution
    step: float

    @property
    def p(self) -> np.ndarray:
        return self.solution.p


@dataclass
class Branch:
    """Ordered continuation points with closure and truncation flags."""

    points: list[BranchPoint]
    parameter: int
    closed: bool = False
    truncated: bool = False
    reason: str = ""
    notes: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def arclength(self) -> np.ndarray:
        return np.array([pt.s for pt in self.points])

    def values(self, index: int | None = None) -> np.ndarray:
        """Parameter values along the branch (the continuation parameter by default)."""
        index = self.parameter if index is None else index
        return np.array([pt.p[index] for pt in self.points])

    @property
    def sigma_min(self) -> np.ndarray:
        return np.array([pt.solution.sigma_min for pt in self.points])


Refresh = Callable[[CollocationProblem, np.ndarray], tuple[CollocationProblem, np.ndarray]]
StopPredicate = Callable[[BranchPoint, Branch], bool]
AcceptPredicate = Callable[[np.ndarray, np.ndarray], bool]


class _Extended:
    """The problem with the continuation parameter appended as an unknown."""

    def __init__(self, problem: CollocationProblem, parameter: int):
        if parameter in problem.free:
            raise ValueError(f"parameter {parameter} is already free")
        self.problem = problem
        self.parameter = parameter
        self.free = (*problem.free, parameter)
        n_nodes = problem.intervals + 1
        weights = np.zeros(problem.size(self.free))
        weights[: problem.n_node_unknowns] = 1.0 / n_nodes
        weights[problem.n_node_unknowns + problem.n_stage_unknowns :] = 1.0
        self.weights = weights

    def residual(self, z: np.ndarray) -> np.ndarray:
        return self.problem.residual(z, self.free)

    def jacobian(self, z: np.ndarray) -> sparse.csc_matrix:
        return self.problem.jacobian(z, self.free)

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.weights * a * b))

    def norm(self, dz: np.ndarray) -> float:
        return float(np.sqrt(self.dot(dz, dz)))

    def tangent(self, z: np.ndarray, reference: np.ndarray) -> np.ndarray:
        """Null vector of the Jacobian, oriented along ``reference``."""
        J = self.jacobian(z)
        row = sparse.csc_matrix((self.weights * reference).reshape(1, -1))
        rhs = np.zeros(J.shape[0] + 1)
        rhs[-1] = 1.0
        t = _solve(sparse.vstack([J, row]), rhs)
        return t / self.norm(t)

    def correct(
        self,
        z: np.ndarray,
        anchor: np.ndarray,
        direction: np.ndarray,
        distance: float,
        tol: float,
        max_iterations: int,
    ) -> tuple[np.ndarray, int]:
        weighted = self.weights * direction
        row = sparse.csc_matrix(weighted.reshape(1, -1))

        def residual(v: np.ndarray) -> np.ndarray:
            return np.append(self.residual(v), weighted @ (v - anchor) - distance)

        def jacobian(v: np.ndarray) -> sparse.csc_matrix:
            return sparse.vstack([self.jacobian(v), row]).tocsc()

        z, _, iterations, _ = newton(residual, jacobian, z, tol, max_iterations, max_halvings=0)
        return z, iterations

    def sigma(self, z: np.ndarray, direction: np.ndarray) -> float:
        _, cols = self.problem.norm_weights(self.free)
        row = sparse.csc_matrix((self.weights * direction / np.sqrt(cols)).reshape(1, -1))
        J = self.problem.scaled_jacobian(z, self.free)
        return smallest_singular_value(sparse.vstack([J, row]).tocsc())

    def solution(self, z: np.ndarray, direction: np.ndarray) -> BvpSolution:
        _, _, p = self.problem.unpack(z, self.free)
        problem = self.problem.with_changes(p=p)
        base = np.delete(z, len(z) - 1)
        residual = float(np.max(np.abs(self.residual(z))))
        return BvpSolution(problem, base, p, residual, self.sigma(z, direction))


def _solve(J: sparse.spmatrix, rhs: np.ndarray) -> np.ndarray:
    from scipy.sparse.linalg import splu

    try:
        return splu(sparse.csc_matrix(J)).solve(rhs)
    except RuntimeError:
        raise SingularJacobianError(0.0, float("nan")) from None


def continue_branch(
    problem: CollocationProblem,
    start: BvpSolution,
    parameter: int,
    config: StepConfig | None = None,
    stop: StopPredicate | None = None,
    refresh: Refresh | None = None,
    accept: AcceptPredicate | None = None,
) -> Branch:
    """Trace the solution family of ``problem`` as parameter ``parameter`` varies.

    Tangent predictor, Newton corrector on the pseudo-arclength hyperplane.
    The step grows after fast corrections and halves after failures; a step
    below ``min_step`` truncates the branch. With ``detect_closure``, once the
    start lies less than a step ahead after ``min_arclength``, the step is cut
    to land on the hyperplane through the start; the branch is closed only
    if that corrected point is within ``closure_tol`` of the start.
    ``refresh`` may replace the problem (and re-express the unknowns) after
    every corrected point; the point is then corrected once more, and a
    failure there is retried with half the step on the old problem.
    ``accept(previous_p, trial_p)`` may reject a corrected step, which is
    then retried with half the step.
    """
    config = config or StepConfig()
    problem = problem.with_changes(p=start.p)
    extended = _Extended(problem, parameter)
    base = problem.initial_vector(start)
    z = np.append(base, start.p[parameter])

    e = np.zeros_like(z)
    e[-1] = float(config.direction)
    tangent = extended.tangent(z, e)
    if tangent[-1] * config.direction < 0:
        tangent = -tangent

    branch = Branch(
        points=[BranchPoint(0.0, extended.solution(z, tangent), 0.0)], parameter=parameter
    )
    z_start = z.copy()
    h = config.step
    s = 0.0
    missed_start = False

    while len(branch.points) < config.max_points:
        ahead = extended.dot(tangent, z_start - z)
        if extended.norm(z - z_start) > config.max_step:
            missed_start = False
        closing = (
            config.detect_closure
            and not missed_start
            and len(branch.points) > 2
            and s >= config.min_arclength
            and extended.norm(z - z_start) <= h
            and ahead > config.min_step
        )
        # a closing step lands on the hyperplane through the start
        step = ahead if closing else h
        failure = ""
        try:
            trial, iterations = extended.correct(
                z + step * tangent, z, tangent, step, config.newton_tol, config.max_iterations
            )
            new_tangent = extended.tangent(trial, tangent)
        except (NewtonError, SingularJacobianError) as exc:
            failure = f"step rejected ({exc})"
        else:
            distance = extended.norm(trial - z)
            if accept is not None and not accept(
                extended.problem.unpack(z, extended.free)[2],
                extended.problem.unpack(trial, extended.free)[2],
            ):
                failure = "step rejected by the acceptance check"
            elif distance > config.max_step * 1.5:
                failure = f"corrector jumped {distance:.3e}"
            elif refresh is not None:
                new_problem, refreshed = refresh(extended.problem, trial)
                refreshed_extended = _Extended(new_problem, parameter)
                try:
                    refreshed, _ = refreshed_extended.correct(
                        refreshed,
                        refreshed,
                        new_tangent,
                        0.0,
                        config.newton_tol,
                        config.max_iterations,
                    )
                    new_tangent = refreshed_extended.tangent(refreshed, new_tangent)
                except (NewtonError, SingularJacobianError) as exc:
                    failure = f"refresh correction failed ({exc})"
                else:
                    extended, trial = refreshed_extended, refreshed

        if failure:
            h /= 2.0
            if config.verbose:
                console.print(f"[dim]{failure}; h={h:.3e}[/dim]")
            if h < config.min_step:
                branch.truncated = True
                branch.reason = f"step underflow at s={s:.6g}"
                break
            continue

        s += distance
        z, tangent = trial, new_tangent
        point = BranchPoint(s, extended.solution(z, tangent), h)
        branch.points.append(point)
        if config.verbose:
            console.print(
                f"[dim]point {len(branch.points)}: s={s:.5f} "
                f"p[{parameter}]={z[-1]:.8g} iterations={iterations}[/dim]"
            )

        if closing:
            if extended.norm(z - z_start) < config.closure_tol:
                branch.closed = True
                branch.reason = "closed"
                break
            missed_start = True
            branch.notes.append(f"passed the start at s={s:.6g} without closing")
        if stop is not None and stop(point, branch):
            branch.reason = "stop predicate"
            break
        if iterations <= config.fast_iterations:
            h = min(h * config.grow, config.max_step)
    else:
        branch.reason = "maximum points reached"

    return branch
