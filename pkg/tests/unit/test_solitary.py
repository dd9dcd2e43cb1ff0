"""
Unit tests for solitary-wave profiles.
"""
import math
from dataclasses import replace

import numpy as np
import pytest
from unittest.mock import patch

from wavelab.core.model import AbcdParams
from wavelab.errors import ConvergenceError, ParameterError
from wavelab.waves import solitary


class TestChenFamily:
    """Test the explicit a = c = -1 family."""

    def test_alpha_to_omega(self):
        """Test alpha = -9/4 travels at speed -1."""
        assert solitary.chen_alpha_to_omega(-2.25) == pytest.approx(-1.0)

    @pytest.mark.parametrize("alpha", [-3.0, -4.0, 0.0])
    def test_alpha_out_of_range(self, alpha):
        """Test forbidden amplitudes raise ParameterError."""
        with pytest.raises(ParameterError):
            solitary.chen_alpha_to_omega(alpha)

    @pytest.mark.parametrize("alpha", [-1.0, 1.0, -0.5])
    def test_g_branch_inverts_speed(self, alpha):
        """Test G(omega(alpha)) = alpha on the plus branch."""
        omega = solitary.chen_alpha_to_omega(alpha, "plus")

        assert solitary.g_branch(omega, "plus") == pytest.approx(alpha, abs=1e-12)

    def test_g_branch_prime(self):
        """Test the closed-form slope of G against a difference quotient."""
        w, h = 0.6, 1e-6
        fd = (solitary.g_branch(w + h) - solitary.g_branch(w - h)) / (2 * h)

        assert solitary.g_branch_prime(w) == pytest.approx(fd, rel=1e-7)

    def test_bad_branch(self):
        """Test unknown branch names are rejected."""
        with pytest.raises(ParameterError):
            solitary.g_branch(0.5, "up")

    def test_profile_solves_equations(self, grid):
        """Test the explicit wave has a spectrally small residual."""
        profile = solitary.chen_profile(-1.0, "plus", grid)

        assert profile.residual < 1e-10
        assert profile.is_analytic
        assert profile.omega == pytest.approx(1.0 / math.sqrt(6.0))

    def test_profile_needs_chen_constants(self, grid):
        """Test explicit waves are refused for other (a, c)."""
        with pytest.raises(ParameterError):
            solitary.chen_profile(-1.0, "plus", grid, AbcdParams(a=-0.8))

    def test_profile_is_even_and_decays(self, grid):
        """Test evenness and the edge magnitude of the sampled wave."""
        profile = solitary.chen_profile(1.0, "minus", grid)

        assert profile.evenness_defect() < 1e-14
        assert profile.edge_magnitude() < 1e-12
        assert profile.branch == "minus"

    def test_profile_at_speed(self, grid):
        """Test chen_profile_at recovers the wave of a given speed."""
        profile = solitary.chen_profile_at(0.5, "plus", grid)

        assert profile.omega == pytest.approx(0.5)
        assert profile.residual < 1e-10

    def test_summary(self, small_grid):
        """Test summary fields."""
        summary = solitary.chen_profile(-1.0, "plus", small_grid).summary()

        assert summary["n"] == 512
        assert summary["alpha"] == -1.0


class TestMomentumAndEnergy:
    """Test quadrature invariants against their closed forms."""

    def test_momentum_alpha_one(self, grid):
        """Test P = 8 sqrt(3) / 5 at alpha = 1."""
        profile = solitary.chen_profile(1.0, "plus", grid)
        expected = 8.0 * math.sqrt(3.0) / 5.0

        assert solitary.profile_momentum(profile) == pytest.approx(expected, rel=1e-10)
        assert solitary.momentum_closed_form(profile.omega) == pytest.approx(expected, rel=1e-12)

    def test_energy_alpha_one(self, grid):
        """Test E = 18/5 at alpha = 1."""
        profile = solitary.chen_profile(1.0, "plus", grid)

        assert solitary.profile_energy(profile) == pytest.approx(3.6, rel=1e-10)
        assert solitary.energy_closed_form(profile.omega) == pytest.approx(3.6, rel=1e-12)

    def test_minus_branch_momentum_sign(self, grid):
        """Test the minus branch carries negative momentum."""
        profile = solitary.chen_profile(1.0, "minus", grid)

        assert solitary.profile_momentum(profile) < 0
        assert solitary.profile_momentum(profile) == pytest.approx(
            solitary.momentum_closed_form(profile.omega, "minus"), rel=1e-10
        )

    def test_slope_closed_form(self):
        """Test dP/domega closed form against differentiating P(omega)."""
        w, h = 0.45, 1e-6
        fd = (solitary.momentum_closed_form(w + h) - solitary.momentum_closed_form(w - h)) / (2 * h)

        assert solitary.momentum_slope_closed_form(w) == pytest.approx(fd, rel=1e-6)

    def test_slope_by_quadrature(self, grid):
        """Test the quadrature slope on exact Chen waves."""
        w = 1.0 / math.sqrt(6.0)
        slope = solitary.slope_dP_domega(AbcdParams(), w, grid=grid)

        assert slope == pytest.approx(solitary.momentum_slope_closed_form(w), rel=1e-4)

    def test_omega_derivative_analytic(self, grid):
        """Test the analytic Lambda Q against differences of explicit waves."""
        w, h = 0.5, 1e-5
        profile = solitary.chen_profile_at(w, "plus", grid)
        lam = solitary.profile_omega_derivative(profile)
        plus = solitary.chen_profile_at(w + h, "plus", grid)
        minus = solitary.chen_profile_at(w - h, "plus", grid)

        np.testing.assert_allclose(lam.eta, (plus.R - minus.R) / (2 * h), atol=1e-7)
        np.testing.assert_allclose(lam.u, (plus.Q - minus.Q) / (2 * h), atol=1e-7)


class TestNewton:
    """Test the spectral Newton solver."""

    def test_recovers_chen_from_perturbed_seed(self, stable_chen, small_grid):
        """Test Newton returns to the explicit wave."""
        bump = 1e-3 * np.exp(-small_grid.x ** 2)
        seed = replace(stable_chen, R=stable_chen.R + bump, alpha=None)
        profile = solitary.newton_solitary(AbcdParams(), stable_chen.omega, seed)

        assert profile.residual < 1e-10
        assert profile.branch == "numeric"
        np.testing.assert_allclose(profile.R, stable_chen.R, atol=1e-8)
        np.testing.assert_allclose(profile.Q, stable_chen.Q, atol=1e-8)

    def test_iteration_budget(self, stable_chen, small_grid):
        """Test exhausting the iteration budget raises ConvergenceError."""
        seed = replace(stable_chen, R=stable_chen.R + 1e-2 * np.exp(-small_grid.x ** 2))

        with patch.object(solitary.logger, 'error') as mock_error:
            with pytest.raises(ConvergenceError):
                solitary.newton_solitary(AbcdParams(), stable_chen.omega, seed, max_iter=0)
            mock_error.assert_called_once()

    def test_supersonic_speed(self, stable_chen):
        """Test speeds at or above the sonic threshold are rejected."""
        with pytest.raises(ParameterError):
            solitary.newton_solitary(AbcdParams(), 1.0, stable_chen)

    def test_continuation_to_other_constants(self, small_grid):
        """Test continuation from the Chen wave to a = -0.8, c = -1.2."""
        params = AbcdParams(a=-0.8, c=-1.2)
        profile = solitary.continue_profile(params, 0.5, small_grid)

        assert profile.residual < 1e-10
        assert profile.params == params
        assert profile.evenness_defect() < 1e-10
        assert profile.edge_magnitude() < 1e-8
        assert not profile.is_analytic

    def test_continuation_chen_shortcut(self, small_grid):
        """Test Chen constants return the explicit wave without Newton."""
        with patch.object(solitary, 'newton_solitary') as mock_newton:
            profile = solitary.continue_profile(AbcdParams(), 0.5, small_grid)
            mock_newton.assert_not_called()

        assert profile.is_analytic

    def test_numeric_omega_derivative(self, small_grid):
        """Test differences of Newton profiles match the analytic Lambda Q."""
        chen = solitary.chen_profile_at(0.5, "plus", small_grid)
        numeric = replace(chen, alpha=None)
        lam = solitary.profile_omega_derivative(numeric, delta=1e-4)
        exact = solitary.profile_omega_derivative(chen)

        np.testing.assert_allclose(lam.eta, exact.eta, atol=2e-5)
        np.testing.assert_allclose(lam.u, exact.u, atol=2e-5)
