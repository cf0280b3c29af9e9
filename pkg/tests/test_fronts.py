"""Tests for patterned fronts and front loops."""

import numpy as np
import pytest

from snakeloop.continuation import StepConfig
from snakeloop.fronts import (
    FrontError,
    FrontLoop,
    PatternedFront,
    check_delta,
    continue_front_loop,
    fit_phase,
    glue_front_guess,
    patterned_back,
    regularity_diagnostic,
    solve_front,
)
from snakeloop.systems import builtin_system
from snakeloop.topology import SNAKING, circle_distance, classify
from snakeloop.wavetrain import cosine_guess, find_wave_train, galerkin_ansatz


def synthetic_front(orbit, psi: float, mu: float = 0.3) -> PatternedFront:
    return PatternedFront(
        mu=mu,
        orbit=orbit,
        profile=None,
        X=30.0,
        psi=psi,
        exit_phase=0.0,
        delta=1e-3,
        tail_amplitude=1e-9,
        sigma_min=0.1,
        exit_offset=0.25,
    )


class TestFitPhase:
    """Tests for the least-squares phase fit."""

    @pytest.mark.parametrize("shift", [0.3, 1.234, 5.9])
    def test_recovers_shift(self, circle_orbit, shift):
        orbit = circle_orbit()

        theta = fit_phase(orbit, lambda x: orbit(np.asarray(x) + shift), -20.0, -20.0 + 2 * np.pi)

        assert theta == pytest.approx(shift, abs=1e-8)

    def test_result_is_wrapped(self, circle_orbit):
        orbit = circle_orbit()

        theta = fit_phase(orbit, lambda x: orbit(np.asarray(x) - 0.5), 0.0, 2 * np.pi)

        assert theta == pytest.approx(2 * np.pi - 0.5, abs=1e-8)


class TestCheckDelta:
    """Tests for the δ truncation floor."""

    def test_accepts_delta_above_floor(self):
        check_delta(1e-3, alpha=1.0, periods=6.0)

    def test_rejects_delta_below_floor(self):
        with pytest.raises(FrontError, match="truncation floor"):
            check_delta(1e-3, alpha=0.01, periods=6.0)

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError, match="positive"):
            check_delta(0.0, alpha=1.0, periods=6.0)


class TestGlueFrontGuess:
    """Tests for the tanh-envelope front guess."""

    def test_envelope_limits(self, circle_orbit):
        orbit = circle_orbit()
        guess = glue_front_guess(orbit, X=30.0, psi=0.7)

        values = guess(np.array([-30.0, 0.0]))

        assert np.allclose(values[:, 0], orbit(-30.0 + 0.7), atol=1e-7)
        assert np.linalg.norm(values[:, 1]) < 1e-4


class TestSolveFrontValidation:
    """Tests for solve_front() argument checks."""

    def test_mu_must_match_orbit(self, circle_orbit):
        orbit = circle_orbit()

        with pytest.raises(ValueError, match="orbit was computed"):
            solve_front(orbit.system, orbit, mu=0.5)

    def test_non_hyperbolic_orbit(self, circle_orbit):
        orbit = circle_orbit(gamma=0.0)

        with pytest.raises(FrontError, match="not hyperbolic"):
            solve_front(orbit.system, orbit)


class TestFrontLoop:
    """Tests for FrontLoop tables and phase loops."""

    def make_loop(self, circle_orbit) -> FrontLoop:
        orbit = circle_orbit()
        s = np.linspace(0.0, 1.0, 9)
        fronts = [synthetic_front(orbit, float(np.mod(2 * np.pi * t, 2 * np.pi))) for t in s]
        return FrontLoop(s=s, fronts=fronts, closed=True)

    def test_to_frame_columns(self, circle_orbit):
        frame = self.make_loop(circle_orbit).to_frame()

        assert list(frame.columns) == [
            "s",
            "mu",
            "varpi",
            "psi",
            "sigma_min",
            "tail_amplitude",
            "X",
        ]
        assert len(frame) == 9

    def test_phase_loop(self, circle_orbit):
        loop = self.make_loop(circle_orbit)

        phase = loop.phase_loop()

        assert classify(phase).winding == 1
        assert np.allclose(phase.exit_offset, 0.25)
        assert loop.max_phase_gap == pytest.approx(np.pi / 4)

    def test_front_to_dict(self, circle_orbit):
        data = synthetic_front(circle_orbit(), 1.0).to_dict()

        assert data["psi"] == 1.0
        assert data["varpi"] == 1.0
        assert data["exit_offset"] == 0.25


@pytest.fixture(scope="module")
def sh23_orbit():
    system = builtin_system("sh23", b=1.8)
    c0, A = galerkin_ansatz(0.36, 1.8)
    return system, find_wave_train(system, 0.36, cosine_guess(c0, A, 1.0), 1.0)


@pytest.fixture(scope="module")
def sh23_front(sh23_orbit):
    system, orbit = sh23_orbit
    return system, solve_front(system, orbit, periods=6.0, delta=1e-3)


@pytest.mark.slow
class TestSh23Front:
    """Full-system front computations for sh23."""

    def test_front_is_converged(self, sh23_front):
        _, front = sh23_front

        assert front.bc_residual < 1e-9
        assert front.sigma_min > 0
        assert 0.0 <= front.psi < 2 * np.pi
        assert -front.X < front.exit_offset <= 0.0

    def test_regular_in_mu(self, sh23_front):
        _, front = sh23_front

        assert regularity_diagnostic(front) > 0

    def test_sigma_min_under_mesh_doubling(self, sh23_orbit, sh23_front):
        system, orbit = sh23_orbit
        _, front = sh23_front

        fine = solve_front(system, orbit, periods=6.0, delta=1e-3, intervals=256)

        assert fine.sigma_min == pytest.approx(front.sigma_min, rel=0.2)

    def test_phase_shift_decays_with_length(self, sh23_orbit):
        system, orbit = sh23_orbit

        psi = [solve_front(system, orbit, periods=p, delta=1e-3).psi for p in (6.0, 7.0, 8.0)]

        first = circle_distance(psi[0], psi[1])
        second = circle_distance(psi[1], psi[2])
        assert second <= max(first / 5.0, 1e-9)

    def test_patterned_back(self, sh23_front):
        _, front = sh23_front

        back = patterned_back(front)

        assert back.bc_residual < 1e-6
        assert back.ode_residual < 1e-3

    def test_loop_snakes(self, sh23_front):
        system, front = sh23_front
        config = StepConfig(step=0.02, max_step=0.1, max_points=2000)

        loop = continue_front_loop(system, front, config)

        assert loop.closed
        result = classify(loop.phase_loop())
        assert result.mode == SNAKING
        assert abs(result.winding) == 1
        assert loop.max_phase_gap < np.pi / 2
