"""Tests for pseudo-arclength continuation."""

import numpy as np
import pytest

from snakeloop.collocation import CollocationProblem, solve_bvp
from snakeloop.continuation import StepConfig, continue_branch


def circle_problem(p: float = 0.0) -> CollocationProblem:
    """Constant u with u² + p² = 1: the solution family is the unit circle."""
    return CollocationProblem(
        rhs=lambda x, u, p: np.zeros(1),
        bc=lambda ua, ub, p, q: np.array([ua[0] ** 2 + p[0] ** 2 - 1.0]),
        dim=1,
        n_conditions=1,
        p=np.array([p]),
        intervals=2,
        degree=2,
    )


def helix_problem() -> CollocationProblem:
    """Constant u = (cos 100λ, sin 100λ): λ grows along the whole family."""
    return CollocationProblem(
        rhs=lambda x, u, p: np.zeros(2),
        bc=lambda ua, ub, p, q: np.array(
            [ua[0] - np.cos(100.0 * p[0]), ua[1] - np.sin(100.0 * p[0])]
        ),
        dim=2,
        n_conditions=2,
        p=np.array([0.0]),
        intervals=2,
        degree=2,
    )


@pytest.fixture
def circle_start():
    problem = circle_problem()
    return problem, solve_bvp(problem, lambda x: np.ones((1, len(np.atleast_1d(x)))))


class TestStepConfig:
    """Tests for step-control validation."""

    def test_defaults_are_valid(self):
        config = StepConfig()

        assert config.min_step <= config.step <= config.max_step

    @pytest.mark.parametrize(
        "changes",
        [
            {"step": 0.0},
            {"newton_tol": -1.0},
            {"step": 1.0, "max_step": 0.5},
            {"min_step": 0.1, "step": 0.05},
            {"direction": 0},
        ],
    )
    def test_invalid_values(self, changes):
        with pytest.raises(ValueError):
            StepConfig(**changes)


class TestContinueBranch:
    """Tests for continue_branch()."""

    def test_unit_circle_closes(self, circle_start):
        problem, start = circle_start
        config = StepConfig(
            step=0.05, max_step=0.1, detect_closure=True, min_arclength=1.0, max_points=500
        )

        branch = continue_branch(problem, start, 0, config)

        assert branch.closed
        assert branch.reason == "closed"
        assert branch.arclength[-1] == pytest.approx(2 * np.pi, abs=0.05)
        u = np.array([pt.solution.left[0] for pt in branch.points])
        p = branch.values()
        assert np.allclose(u**2 + p**2, 1.0, atol=1e-9)
        assert p[-1] == pytest.approx(p[0], abs=1e-6)

    def test_helix_never_closes(self):
        problem = helix_problem()
        start = solve_bvp(problem, lambda x: np.vstack([np.ones_like(x), np.zeros_like(x)]))
        config = StepConfig(
            step=0.02, max_step=0.1, detect_closure=True, min_arclength=1.0, max_points=150
        )

        branch = continue_branch(problem, start, 0, config)

        lam = branch.values()
        assert not branch.closed
        assert branch.reason == "maximum points reached"
        assert np.all(np.diff(lam) > 0)
        assert lam[-1] > 2 * np.pi / 100

    def test_closing_step_is_checked_by_accept(self, circle_start):
        problem, start = circle_start
        config = StepConfig(
            step=0.05, max_step=0.1, detect_closure=True, min_arclength=1.0, max_points=500
        )
        seen: list[float] = []

        def accept(previous, trial):
            seen.append(trial[0])
            return True

        branch = continue_branch(problem, start, 0, config, accept=accept)

        assert branch.closed
        assert seen[-1] == branch.values()[-1]

    def test_failed_refresh_is_retried_shorter(self, circle_start):
        problem, start = circle_start
        failures: list[np.ndarray] = []

        def impossible(ua, ub, p, q):
            return np.array([ua[0] ** 2 + p[0] ** 2 + 1.0])

        def refresh(current, z):
            if len(failures) < 3:
                failures.append(z)
                return current.with_changes(bc=impossible), z + 0.3
            return current, z

        branch = continue_branch(
            problem, start, 0, StepConfig(step=0.05, max_step=0.1, max_points=5), refresh=refresh
        )

        assert len(failures) == 3
        assert len(branch) == 5
        assert branch.points[1].step == pytest.approx(0.05 / 8)
        u = np.array([pt.solution.left[0] for pt in branch.points])
        assert np.allclose(u**2 + branch.values() ** 2, 1.0, atol=1e-9)

    def test_direction_sets_parameter_motion(self, circle_start):
        problem, start = circle_start
        config = StepConfig(step=0.05, max_step=0.1, max_points=4, direction=-1)

        branch = continue_branch(problem, start, 0, config)

        assert branch.values()[1] < 0.0
        assert branch.reason == "maximum points reached"
        assert len(branch) == 4

    def test_passes_around_fold(self, circle_start):
        problem, start = circle_start
        config = StepConfig(step=0.05, max_step=0.1, max_points=60)

        branch = continue_branch(problem, start, 0, config)

        p = branch.values()
        assert p.max() == pytest.approx(1.0, abs=0.01)
        assert p[-1] < p.max()

    def test_stop_predicate(self, circle_start):
        problem, start = circle_start
        config = StepConfig(step=0.05, max_step=0.1)

        branch = continue_branch(
            problem, start, 0, config, stop=lambda point, branch: point.p[0] > 0.5
        )

        assert branch.reason == "stop predicate"
        assert branch.values()[-1] > 0.5
        assert np.all(branch.values()[:-1] <= 0.5)

    def test_rejecting_every_step_truncates(self, circle_start):
        problem, start = circle_start
        config = StepConfig(step=0.05, min_step=1e-3, max_step=0.1)

        branch = continue_branch(problem, start, 0, config, accept=lambda old, new: False)

        assert branch.truncated
        assert "step underflow" in branch.reason
        assert len(branch) == 1

    def test_sigma_min_recorded(self, circle_start):
        problem, start = circle_start

        branch = continue_branch(problem, start, 0, StepConfig(max_points=5))

        assert np.all(branch.sigma_min > 0)

    def test_free_parameter_rejected(self):
        problem = CollocationProblem(
            rhs=lambda x, u, p: np.zeros(1),
            bc=lambda ua, ub, p, q: np.array([ua[0] - 1.0, p[0] - 2.0]),
            dim=1,
            n_conditions=2,
            p=np.array([2.0]),
            free=(0,),
            intervals=2,
        )
        start = solve_bvp(problem, lambda x: np.ones((1, len(np.atleast_1d(x)))))

        with pytest.raises(ValueError, match="already free"):
            continue_branch(problem, start, 0)
