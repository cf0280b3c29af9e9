"""Tests for wave trains, Floquet data and orbit families."""

import numpy as np
import pytest

from snakeloop.continuation import StepConfig
from snakeloop.wavetrain import (
    OrbitNeighbourhood,
    PlateauError,
    TrivialOrbitError,
    continue_family,
    cosine_guess,
    elementary_check,
    family_tangent_norm,
    find_wave_train,
    floquet_analysis,
    floquet_frame,
    galerkin_ansatz,
    neighbourhood_exit,
    transversality_measure,
)

from .conftest import CircleProfile


class TestPeriodicOrbit:
    """Tests for PeriodicOrbit evaluation."""

    def test_reflection_on_second_half(self, circle_orbit):
        orbit = circle_orbit()
        theta = np.linspace(0.0, 2 * np.pi, 9)

        values = orbit(theta)

        assert np.allclose(values[0], np.cos(theta), atol=1e-12)
        assert np.allclose(values[1], -np.sin(theta), atol=1e-12)

    def test_periodic_in_theta(self, circle_orbit):
        orbit = circle_orbit()

        assert np.allclose(orbit(0.3), orbit(0.3 + 2 * np.pi))

    def test_tangent(self, circle_orbit):
        orbit = circle_orbit()

        assert np.allclose(orbit.tangent(0.7), [-np.sin(0.7), -np.cos(0.7), 0.0, 0.0])

    def test_amplitude_and_symmetry(self, circle_orbit):
        orbit = circle_orbit(radius=0.5)

        assert orbit.amplitude == pytest.approx(0.5, abs=1e-4)
        assert orbit.symmetry_residual == 0.0
        assert orbit.period == pytest.approx(2 * np.pi)


class TestFindWaveTrain:
    """Tests for the half-period wave-train solve."""

    def test_linear_test_orbit(self, linear_wave_train):
        orbit = linear_wave_train

        assert orbit.varpi == pytest.approx(1.0, abs=1e-9)
        assert orbit.kappa == pytest.approx(1.0)
        theta = np.linspace(0.0, 2 * np.pi, 17)
        assert np.allclose(orbit(theta)[0], np.cos(theta), atol=1e-8)
        assert orbit.symmetry_residual < 1e-10

    @pytest.mark.parametrize("mu", [0.0, 0.2])
    def test_floquet_exponent(self, linear_system, mu):
        orbit = find_wave_train(linear_system, mu, CircleProfile(1.0), varpi=1.05, intervals=32)

        assert orbit.alpha == pytest.approx(1.0 + mu, abs=1e-8)
        assert orbit.hyperbolic
        assert orbit.floquet.determinant == pytest.approx(1.0, abs=1e-8)
        assert np.allclose(orbit.floquet.cluster, 1.0, atol=1e-8)
        assert orbit.diagnostics == []

    def test_collocation_degree(self, linear_system):
        orbit = find_wave_train(
            linear_system, 0.0, CircleProfile(1.0), varpi=1.05, intervals=32, degree=3
        )

        assert orbit.solution.problem.degree == 3
        assert orbit.varpi == pytest.approx(1.0, abs=1e-8)

    def test_trivial_orbit(self, linear_system):
        with pytest.raises(TrivialOrbitError):
            find_wave_train(
                linear_system, 0.0, CircleProfile(1.0), varpi=1.0, intervals=16, min_amplitude=2.0
            )

    def test_rejects_nonpositive_wavenumber(self, linear_system):
        with pytest.raises(ValueError, match="wavenumber"):
            find_wave_train(linear_system, 0.0, CircleProfile(1.0), varpi=0.0)

    def test_to_dict(self, linear_wave_train):
        data = linear_wave_train.to_dict()

        assert data["system"] == "linear-test"
        assert data["hyperbolic"] is True
        assert len(data["multipliers_real"]) == 4

    def test_galerkin_guess_for_sh23(self):
        c0, A = galerkin_ansatz(0.36, 1.8)
        guess = cosine_guess(c0, A, 1.0)

        values = guess(np.array([0.0, np.pi]))

        assert A > 0
        assert values[0, 0] == pytest.approx(c0 + A)
        assert np.allclose(values[[1, 3]], 0.0, atol=1e-12)


class TestFloquet:
    """Tests for Floquet data on closed-form orbits."""

    def test_multipliers_of_linear_test(self, circle_orbit):
        orbit = circle_orbit()
        floquet_analysis(orbit.system, orbit, tol=1e-12)

        magnitudes = np.sort(np.abs(orbit.floquet.multipliers))
        expected = np.sort([np.exp(-2 * np.pi), 1.0, 1.0, np.exp(2 * np.pi)])
        assert np.allclose(magnitudes, expected, rtol=1e-8)
        assert orbit.alpha == pytest.approx(1.0, abs=1e-9)

    def test_floquet_vectors(self, circle_orbit):
        orbit = circle_orbit()
        floquet_analysis(orbit.system, orbit, tol=1e-12)
        floquet = orbit.floquet

        assert abs(floquet.unstable_right @ [0.0, 0.0, 1.0, 1.0]) == pytest.approx(
            np.sqrt(2.0), abs=1e-8
        )
        assert floquet.center_left.shape == (4, 2)

    def test_frame_transports_to_phase(self, circle_orbit):
        orbit = circle_orbit()
        floquet_analysis(orbit.system, orbit, tol=1e-12)

        frame = floquet_frame(orbit, np.pi / 2)

        assert np.allclose(frame.point, [0.0, -1.0, 0.0, 0.0], atol=1e-12)
        assert np.linalg.norm(frame.unstable_right) == pytest.approx(1.0)

    def test_frame_needs_floquet_data(self, circle_orbit):
        with pytest.raises(ValueError, match="no Floquet data"):
            floquet_frame(circle_orbit(), 0.0)


class TestElementaryCheck:
    """Tests for the transversality measure of the half-period map."""

    @pytest.mark.parametrize("gamma", [0.5, 1.0])
    def test_linear_test_measure(self, circle_orbit, gamma):
        orbit = circle_orbit(gamma=gamma)

        measure = elementary_check(orbit.system, orbit)

        expected = np.sin(np.arctan(np.tanh(np.pi * gamma)))
        assert measure == pytest.approx(expected, abs=1e-8)

    def test_degenerate_saddle_block(self, circle_orbit):
        orbit = circle_orbit(gamma=0.0)

        assert elementary_check(orbit.system, orbit) < 1e-10

    def test_identity_half_map(self):
        R = np.diag([1.0, -1.0, 1.0, -1.0])
        f = np.array([0.0, 1.0, 0.0, 0.0])

        assert transversality_measure(np.eye(4), R, f, f) == pytest.approx(0.0, abs=1e-12)


class TestOrbitFamily:
    """Tests for local orbit families."""

    def test_tangent_norm_of_linear_family(self, linear_wave_train):
        assert family_tangent_norm(linear_wave_train) == pytest.approx(1.0, abs=1e-6)

    def test_kappa_family(self, linear_wave_train, linear_system):
        config = StepConfig(step=0.05, max_step=0.1)

        family = continue_family(linear_system, linear_wave_train, "kappa", (0.8, 1.2), config)

        assert not family.truncated
        assert family.kappa.min() >= 0.8 - 1e-9
        assert family.kappa.max() <= 1.2 + 1e-9
        assert np.all(np.diff(family.kappa) > 0)
        assert np.allclose(family.varpi, 1.0, atol=1e-9)
        assert list(family.to_frame().columns) == ["kappa", "mu", "varpi", "alpha", "hyperbolic"]

    def test_mu_family_tracks_alpha(self, linear_wave_train, linear_system):
        config = StepConfig(step=0.05, max_step=0.1)

        family = continue_family(linear_system, linear_wave_train, "mu", (0.0, 0.3), config)

        frame = family.to_frame()
        assert frame["mu"].iloc[0] == 0.0
        assert np.allclose(frame["alpha"], 1.0 + frame["mu"], atol=1e-7)

    def test_range_must_contain_base(self, linear_wave_train, linear_system):
        with pytest.raises(ValueError, match="does not contain"):
            continue_family(linear_system, linear_wave_train, "kappa", (2.0, 3.0))

    def test_unknown_direction(self, linear_wave_train, linear_system):
        with pytest.raises(ValueError, match="direction"):
            continue_family(linear_system, linear_wave_train, "varpi", (0.0, 1.0))


class TestNeighbourhoodExit:
    """Tests for the ε-neighbourhood exit point."""

    def test_exit_of_spiralling_profile(self, circle_orbit):
        orbit = circle_orbit()

        def profile(x):
            x = np.asarray(x, dtype=float)
            radius = 1.0 + np.maximum(x - 5.0, 0.0)
            zero = np.zeros_like(x)
            return np.array([radius * np.cos(x), -radius * np.sin(x), zero, zero])

        x = neighbourhood_exit(profile, OrbitNeighbourhood(orbit), 0.05, 0.0, 10.0)

        assert x == pytest.approx(5.05, abs=2e-3)

    def test_stays_inside_until_stop(self, circle_orbit):
        orbit = circle_orbit()

        x = neighbourhood_exit(orbit, OrbitNeighbourhood(orbit), 0.05, 0.0, 3.0)

        assert x == 3.0

    def test_never_inside(self, circle_orbit):
        orbit = circle_orbit()

        def far(x):
            return np.tile([[5.0], [0.0], [0.0], [0.0]], (1, len(np.atleast_1d(x))))

        with pytest.raises(PlateauError) as exc_info:
            neighbourhood_exit(far, OrbitNeighbourhood(orbit), 0.1, 0.0, 1.0)

        assert exc_info.value.closest == pytest.approx(4.0, abs=1e-3)

    def test_needs_points(self):
        with pytest.raises(ValueError, match="needs an orbit"):
            OrbitNeighbourhood()
