"""Tests for phase lifting, winding numbers and branch predictions."""

import numpy as np
import pytest

from snakeloop.topology import (
    ISOLAS,
    SNAKING,
    LiftingError,
    PhaseLoop,
    check_phi0,
    circle_distance,
    classify,
    extend_lifting,
    lift_path,
    predict_branches,
    refine_midpoints,
    wrap,
)

TWO_PI = 2 * np.pi


def random_loop(rng: np.random.Generator, winding: int, samples: int = 40) -> np.ndarray:
    noise = rng.uniform(-0.3, 0.3, samples + 1)
    noise[-1] = noise[0]
    return wrap(TWO_PI * winding * np.arange(samples + 1) / samples + noise)


def loop_of(psi: np.ndarray, mu: np.ndarray | None = None) -> PhaseLoop:
    s = np.linspace(0.0, 1.0, len(psi))
    if mu is None:
        mu = 0.3 + 0.05 * np.sin(TWO_PI * s)
    return PhaseLoop(s=s, psi=psi, mu=mu, closed=True)


class TestCircleHelpers:
    """Tests for wrap, circle_distance and check_phi0."""

    def test_wrap_range(self):
        values = wrap(np.array([-0.1, 0.0, TWO_PI, 7.0]))

        assert np.all((values >= 0) & (values < TWO_PI))
        assert values[2] == 0.0

    def test_circle_distance_short_arc(self):
        assert circle_distance(0.1, TWO_PI - 0.1) == pytest.approx(0.2)
        assert circle_distance(0.0, np.pi) == pytest.approx(np.pi)

    def test_check_phi0(self):
        assert check_phi0(np.pi) == np.pi
        with pytest.raises(ValueError, match="phi0 must be 0 or pi"):
            check_phi0(1.0)


class TestLiftPath:
    """Tests for lift_path()."""

    def test_constant_path(self):
        path = lift_path(np.full(5, 0.3), closed=True)

        assert path.winding == 0
        assert np.allclose(path.lifted, 0.3)

    def test_one_turn(self):
        psi = TWO_PI * np.arange(9) / 8

        path = lift_path(psi, closed=True)

        assert path.winding == 1
        assert path.lifted[-1] == pytest.approx(TWO_PI)

    def test_two_turns_with_wobble(self):
        j = np.arange(17)
        psi = 4 * np.pi * j / 16 + 0.3 * np.sin(TWO_PI * j / 16)

        assert lift_path(psi, closed=True).winding == 2

    def test_lift_reduces_to_samples(self):
        rng = np.random.default_rng(3)
        psi = random_loop(rng, -1)

        path = lift_path(psi, closed=True)

        assert np.allclose(wrap(path.lifted), path.psi)
        assert np.all(np.abs(np.diff(path.lifted)) < np.pi)

    def test_gap_of_pi_rejected(self):
        with pytest.raises(LiftingError) as exc_info:
            lift_path([0.0, np.pi], closed=False)

        assert exc_info.value.index == 1
        assert "sampling too coarse" in str(exc_info.value)

    def test_open_path_has_no_winding(self):
        assert lift_path([0.0, 1.0, 2.0], closed=False).winding is None

    def test_closed_path_must_return(self):
        with pytest.raises(ValueError, match="does not return"):
            lift_path([0.0, 1.0, 2.0], closed=True)

    def test_empty_path(self):
        with pytest.raises(ValueError, match="empty"):
            lift_path([], closed=False)

    @pytest.mark.parametrize("winding", [-2, -1, 0, 1, 2])
    def test_winding_survives_refinement_and_reversal(self, winding):
        rng = np.random.default_rng(winding + 10)
        for _ in range(10):
            psi = random_loop(rng, winding)

            assert lift_path(psi, closed=True).winding == winding
            assert lift_path(refine_midpoints(psi), closed=True).winding == winding
            assert lift_path(psi[::-1], closed=True).winding == -winding

    def test_refine_midpoints_takes_short_arc(self):
        refined = refine_midpoints(np.array([TWO_PI - 0.2, 0.2]))

        assert len(refined) == 3
        assert circle_distance(refined[1], 0.0) == pytest.approx(0.0, abs=1e-12)


class TestExtendLifting:
    """Tests for the extension of the lift to s ≥ 0."""

    def test_telescoping(self):
        path = lift_path(wrap(TWO_PI * np.linspace(0.0, 1.0, 21)), closed=True)
        extended = extend_lifting(path)

        s = np.array([0.0, 0.37, 1.5, 2.25])
        assert np.allclose(extended(s + 1) - extended(s), TWO_PI)
        assert extended(2.5) == pytest.approx(5 * np.pi)

    def test_negative_winding_is_reoriented(self):
        path = lift_path(wrap(-2 * TWO_PI * np.linspace(0.0, 1.0, 41)), closed=True)
        extended = extend_lifting(path)

        assert extended.reversed
        assert extended.winding == 2
        assert extended(1.0) - extended(0.0) == pytest.approx(2 * TWO_PI)
        assert extended.base_parameter(0.25) == pytest.approx(0.75)

    def test_null_homotopic_rejected(self):
        with pytest.raises(ValueError, match="null-homotopic"):
            extend_lifting(lift_path(np.full(5, 1.0), closed=True))

    def test_open_path_rejected(self):
        with pytest.raises(ValueError, match="closed"):
            extend_lifting(lift_path([0.0, 1.0], closed=False))

    def test_negative_s_rejected(self):
        extended = extend_lifting(lift_path(wrap(TWO_PI * np.linspace(0, 1, 9)), closed=True))

        with pytest.raises(ValueError):
            extended(-0.5)


class TestClassify:
    """Tests for isolas/snaking classification."""

    def test_snaking(self):
        result = classify(loop_of(wrap(TWO_PI * np.linspace(0.0, 1.0, 33))))

        assert result.mode == SNAKING
        assert str(result) == "SNAKING w=1"

    def test_isolas(self):
        s = np.linspace(0.0, 1.0, 33)
        result = classify(loop_of(np.pi / 2 + 0.5 * np.sin(TWO_PI * s)))

        assert result.mode == ISOLAS
        assert str(result) == "ISOLAS w=0"

    def test_reversed_loop_negates_winding(self):
        loop = loop_of(wrap(TWO_PI * np.linspace(0.0, 1.0, 33)))

        assert classify(loop.reversed()).winding == -1

    def test_open_loop_rejected(self):
        loop = PhaseLoop(s=[0.0, 1.0], psi=[0.0, 1.0], mu=[0.0, 0.1], closed=False)

        with pytest.raises(ValueError, match="closed loop"):
            classify(loop)

    def test_loop_validation(self):
        with pytest.raises(ValueError, match="equal length"):
            PhaseLoop(s=[0.0, 1.0], psi=[0.0], mu=[0.0, 0.0])
        with pytest.raises(ValueError, match="increasing"):
            PhaseLoop(s=[0.0, 0.0], psi=[0.0, 0.0], mu=[0.0, 0.0])


class TestPredictBranches:
    """Tests for leading-order branch predictions."""

    def test_constant_phase_isolas(self):
        loop = loop_of(np.full(21, np.pi / 2))

        predictions = predict_branches(loop, 0.0, n_range=(3, 5))

        assert [p.n for p in predictions] == [3, 4, 5]
        assert np.allclose(predictions[0].L, np.pi / 2 + 6 * np.pi)
        assert all(p.closed for p in predictions)

    def test_isolas_shift_by_a_period(self):
        s = np.linspace(0.0, 1.0, 33)
        loop = loop_of(np.pi / 2 + 0.5 * np.sin(TWO_PI * s))

        first, second = predict_branches(loop, np.pi, n_range=(3, 4))

        assert np.allclose(second.L - first.L, TWO_PI)
        assert np.allclose(second.mu, first.mu)

    def test_snaking_branch(self):
        loop = loop_of(wrap(TWO_PI * np.linspace(0.0, 1.0, 33)))

        (prediction,) = predict_branches(loop, np.pi, s_range=(3.0, 6.0))

        assert prediction.mode == SNAKING
        assert prediction.winding == 1
        assert prediction.s[0] == 3.0 and prediction.s[-1] == 6.0
        assert np.allclose(prediction.L, TWO_PI * prediction.s - np.pi)
        assert np.all(np.diff(prediction.L) > 0)

    def test_phi0_shift(self):
        loop = loop_of(wrap(TWO_PI * np.linspace(0.0, 1.0, 33)))

        (zero,) = predict_branches(loop, 0.0, s_range=(3.0, 4.0))
        (pi,) = predict_branches(loop, np.pi, s_range=(3.0, 4.0))

        assert np.allclose(zero.L - pi.L, np.pi)

    def test_snaking_mu_follows_loop(self):
        loop = loop_of(wrap(TWO_PI * np.linspace(0.0, 1.0, 33)))

        (prediction,) = predict_branches(loop, 0.0, s_range=(3.0, 5.0), samples_per_turn=8)

        expected = 0.3 + 0.05 * np.sin(TWO_PI * prediction.s)
        assert np.allclose(prediction.mu, expected, atol=2e-3)
        assert len(prediction.s) == 17

    def test_measured_length_uses_wavenumber(self):
        loop = PhaseLoop(
            s=np.linspace(0.0, 1.0, 5),
            psi=np.full(5, 1.0),
            mu=np.zeros(5),
            varpi=np.full(5, 2.0),
            exit_offset=np.full(5, 0.5),
        )

        (prediction, *_) = predict_branches(loop, 0.0, n_range=(3, 3))

        assert np.allclose(prediction.measured_length(), (1.0 + 6 * np.pi) / 2.0 + 0.5)

    def test_to_frame(self):
        loop = loop_of(np.full(5, 1.0))

        frame = predict_branches(loop, 0.0, n_range=(3, 3))[0].to_frame()

        assert list(frame.columns) == ["mode", "phi0", "n", "s", "L", "mu"]
        assert (frame["n"] == 3).all()

    def test_isolas_reject_s_range(self):
        loop = loop_of(np.full(5, 1.0))

        with pytest.raises(ValueError, match="isolas need"):
            predict_branches(loop, 0.0, s_range=(3.0, 4.0))

    def test_snaking_rejects_n_range(self):
        loop = loop_of(wrap(TWO_PI * np.linspace(0.0, 1.0, 9)))

        with pytest.raises(ValueError, match="snaking needs"):
            predict_branches(loop, 0.0, n_range=(3, 4))

    def test_index_below_ell_star(self):
        loop = loop_of(np.full(5, 1.0))

        with pytest.raises(ValueError, match="n_min"):
            predict_branches(loop, 0.0, n_range=(1, 4), ell_star=3)
