"""Tests for time integration and the variational flow."""

import numpy as np
import pytest
from scipy.linalg import expm

from snakeloop.flow import IntegrationError, integrate, transport_left, variational_flow
from snakeloop.systems import linear_test_matrix

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def rotation(u, mu):
    return ROTATION @ u


class TestIntegrate:
    """Tests for integrate()."""

    def test_rotation_returns_after_full_turn(self):
        trajectory = integrate(rotation, 0.0, [1.0, 0.0], 2 * np.pi, tol=1e-12)

        assert np.allclose(trajectory.end, [1.0, 0.0], atol=1e-9)
        assert trajectory.span == pytest.approx(2 * np.pi)

    def test_dense_output(self):
        trajectory = integrate(rotation, 0.0, [1.0, 0.0], 2.0)

        assert np.allclose(trajectory(1.0), [np.cos(1.0), -np.sin(1.0)], atol=1e-8)

    def test_backward_time(self):
        trajectory = integrate(rotation, 0.0, [1.0, 0.0], -np.pi / 2, tol=1e-12)

        assert np.allclose(trajectory.end, [0.0, 1.0], atol=1e-9)

    def test_zero_time_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            integrate(rotation, 0.0, [1.0, 0.0], 0.0)

    def test_terminal_event(self):
        def crossing(t, y):
            return y[0]

        crossing.terminal = True

        trajectory = integrate(rotation, 0.0, [1.0, 0.0], 10.0, tol=1e-12, events=crossing)

        assert trajectory.event_times[0][0] == pytest.approx(np.pi / 2, abs=1e-9)
        assert trajectory.t[-1] == pytest.approx(np.pi / 2, abs=1e-9)

    def test_blow_up_raises(self):
        with pytest.raises(IntegrationError) as exc_info:
            integrate(lambda y, mu: y**2, 0.0, [1.0], 2.0)

        assert exc_info.value.time_reached < 1.0 + 1e-3


class TestVariationalFlow:
    """Tests for the fundamental matrix."""

    def test_linear_system_matches_matrix_exponential(self, linear_system):
        u0 = np.array([0.5, 0.0, 0.1, 0.0])

        end, Y = variational_flow(linear_system, 0.2, u0, 1.3, tol=1e-12)

        A = linear_test_matrix(0.2)
        assert np.allclose(Y, expm(1.3 * A), atol=1e-9)
        assert np.allclose(end, expm(1.3 * A) @ u0, atol=1e-9)

    def test_zero_time_is_identity(self, linear_system):
        _, Y = variational_flow(linear_system, 0.0, np.ones(4), 0.0)

        assert np.array_equal(Y, np.eye(4))

    def test_transport_left_preserves_pairing(self, linear_system):
        u0 = np.array([1.0, 0.0, 0.0, 0.0])
        right = np.array([0.0, 1.0, 0.5, -0.5])
        left = np.array([0.2, 1.0, -1.0, 0.3])

        _, Y = variational_flow(linear_system, 0.0, u0, 0.7, tol=1e-12)
        moved = transport_left(linear_system, 0.0, u0, 0.7, left, tol=1e-12)

        assert moved @ (Y @ right) == pytest.approx(left @ right, abs=1e-9)
