"""Tests for reversible systems and equilibrium spectra."""

import numpy as np
import pytest

from snakeloop.systems import (
    EquilibriumError,
    Reverser,
    ReversibleSystem,
    UnknownSystemError,
    builtin_system,
    check_reversibility,
    equilibrium_spectrum,
)


class TestReverser:
    """Tests for the Reverser involution."""

    def test_swift_hohenberg_reverser(self):
        R = Reverser.diagonal(1, -1, 1, -1)

        assert R.involution_residual == 0.0
        assert R.fix_dimension == 2
        assert R.validate() == []

    def test_fix_constraints_vanish_on_fix_space(self):
        R = Reverser.diagonal(1, -1, 1, -1)
        B = R.fix_constraints()

        assert B.shape == (2, 4)
        assert np.allclose(B @ R.fix_basis(), 0.0)
        assert np.linalg.matrix_rank(B @ R.anti_basis()) == 2

    def test_wrong_fix_dimension(self):
        R = Reverser.diagonal(1, 1, 1, -1)

        assert R.fix_dimension == 3
        assert any("dim Fix R = 3" in e for e in R.validate())

    def test_not_an_involution(self):
        R = Reverser(np.diag([1.0, -1.0, 1.0, -2.0]))

        assert any("R·R" in e for e in R.validate())


class TestCheckReversibility:
    """Tests for the seeded reversibility sample check."""

    @pytest.mark.parametrize("name", ["sh23", "linear-test", "nf-zero"])
    def test_builtin_systems_pass(self, name):
        report = check_reversibility(builtin_system(name), samples=100, seed=0)

        assert report.involution_residual < 1e-12
        assert report.anti_equivariance_residual < 1e-10
        assert report.fix_dimension == 2
        assert report.passed

    def test_non_reversible_system_fails(self):
        system = ReversibleSystem("identity", lambda u, mu: u, Reverser.diagonal(1, -1, 1, -1))

        report = check_reversibility(system, samples=10)

        assert not report.passed
        assert any(d.fatal and "f(Ru)" in d.message for d in report.diagnostics)

    def test_bad_reverser_is_fatal(self):
        system = ReversibleSystem("bad", lambda u, mu: 0.0 * u, Reverser.diagonal(1, 1, 1, -1))

        report = check_reversibility(system, samples=5)

        assert report.fix_dimension == 3
        assert not report.passed

    def test_nonzero_equilibrium_is_not_fatal(self):
        system = ReversibleSystem(
            "shifted",
            lambda u, mu: np.array([u[1], 0.0, u[3], 1.0]),
            Reverser.diagonal(1, -1, 1, -1),
        )

        report = check_reversibility(system, samples=5)

        assert report.equilibrium_residual == 1.0
        assert report.passed
        assert report.diagnostics and not report.diagnostics[0].fatal

    def test_same_seed_same_report(self, sh23):
        first = check_reversibility(sh23, seed=7)
        second = check_reversibility(sh23, seed=7)

        assert first.anti_equivariance_residual == second.anti_equivariance_residual

    def test_rejects_zero_samples(self, sh23):
        with pytest.raises(ValueError, match="sample count"):
            check_reversibility(sh23, samples=0)


class TestEquilibriumSpectrum:
    """Tests for the spectrum of f_u(0, μ)."""

    def test_sh23_quartet(self, sh23):
        report = equilibrium_spectrum(sh23, 0.2)
        expected = np.roots([1.0, 0.0, 2.0, 0.0, 1.2])

        for root in expected:
            assert np.min(np.abs(report.eigenvalues - root)) < 1e-9
        assert report.stable_count == 2
        assert report.unstable_count == 2
        assert report.hyperbolic

    def test_sh23_not_hyperbolic_at_zero(self, sh23):
        report = equilibrium_spectrum(sh23, 0.0)

        assert not report.hyperbolic

    def test_linear_test_spectrum(self, linear_system):
        report = equilibrium_spectrum(linear_system, 0.5)

        assert np.allclose(np.sort(report.eigenvalues.real), [-1.5, 0.0, 0.0, 1.5])
        assert report.stable_count == 1
        assert report.unstable_count == 1

    def test_not_an_equilibrium(self):
        system = ReversibleSystem(
            "shifted",
            lambda u, mu: np.array([u[1], 0.0, u[3], 1.0]),
            Reverser.diagonal(1, -1, 1, -1),
        )

        with pytest.raises(EquilibriumError):
            equilibrium_spectrum(system, 0.0)

    def test_to_dict(self, sh23):
        data = equilibrium_spectrum(sh23, 0.2).to_dict()

        assert len(data["eigenvalues_real"]) == 4
        assert data["stable_count"] == 2


class TestSpectralProjectors:
    """Tests for stable/unstable projectors at the equilibrium."""

    def test_unstable_rows_annihilate_stable_subspace(self, sh23):
        rows = sh23.unstable_rows(0.2)
        stable = sh23.spectral_projector(0.2, "stable")

        assert rows.shape == (2, 4)
        assert np.max(np.abs(rows @ stable)) < 1e-10

    def test_projectors_sum_to_identity(self, sh23):
        total = sh23.spectral_projector(0.3, "stable") + sh23.spectral_projector(0.3, "unstable")

        assert np.allclose(total, np.eye(4))

    def test_analytic_jacobian_matches_differences(self, sh23):
        u = np.array([0.3, -0.2, 0.1, 0.4])
        plain = ReversibleSystem("plain", sh23.rhs, sh23.reverser)

        assert np.allclose(sh23.jacobian(u, 0.2), plain.jacobian(u, 0.2), atol=1e-6)


class TestBuiltinSystem:
    """Tests for built-in system lookup."""

    def test_unknown_system(self):
        with pytest.raises(UnknownSystemError) as exc_info:
            builtin_system("sh35")

        assert "sh23" in exc_info.value.available
        assert "Unknown system 'sh35'" in str(exc_info.value)

    def test_sh23_parameter(self):
        assert builtin_system("sh23", b=2.0).params == {"b": 2.0}
