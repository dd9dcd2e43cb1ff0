"""
Unit tests for the pseudo-spectral time integration.
"""
import numpy as np
import pytest
from unittest.mock import patch

from wavelab.core.model import AbcdParams, BottomSpec
from wavelab.core.spectral import FieldPair, deriv, shift, shift_pair, sobolev_norm
from wavelab.dynamics import evolve
from wavelab.dynamics.diagnostics import energy_H, momentum_P
from wavelab.dynamics.evolve import EvolveConfig
from wavelab.errors import BlowUpError, ParameterError
from wavelab.waves.solitary import chen_profile


class TestEvolveConfig:
    """Test time-stepping settings."""

    def test_defaults_follow_grid(self, grid):
        """Test dt = dx/4 and a stride of about half a time unit."""
        cfg = EvolveConfig(0.0, 10.0)
        dt = cfg.resolved_dt(grid)

        assert dt == pytest.approx(0.25 * grid.dx)
        assert cfg.resolved_stride(dt) == round(0.5 / dt)

    @pytest.mark.parametrize("kwargs", [
        {"dt": -0.1},
        {"stepper": "euler"},
        {"output_stride": 0},
    ])
    def test_invalid_settings(self, kwargs):
        """Test invalid settings raise ParameterError."""
        with pytest.raises(ParameterError):
            EvolveConfig(0.0, 1.0, **kwargs)

    def test_empty_interval(self):
        """Test t_end must exceed t_start."""
        with pytest.raises(ParameterError):
            EvolveConfig(1.0, 1.0)


class TestRightHandSide:
    """Test the evolution operator on known solutions."""

    def test_travelling_wave(self, stable_chen, flat_bottom):
        """Test d/dt of an exact wave is -omega d/dx."""
        pair = stable_chen.pair
        out = evolve.rhs(pair, 0.0, stable_chen.params, flat_bottom)
        g = pair.grid

        np.testing.assert_allclose(out.eta, -stable_chen.omega * deriv(pair.eta, g), atol=1e-10)
        np.testing.assert_allclose(out.u, -stable_chen.omega * deriv(pair.u, g), atol=1e-10)

    def test_pde_residual_of_exact_wave(self, stable_chen, flat_bottom):
        """Test the residual vanishes for the exact time derivative."""
        pair = stable_chen.pair
        dot = pair.map(lambda f: -stable_chen.omega * deriv(f, pair.grid))
        residual = evolve.pde_residual(pair, dot, 0.0, stable_chen.params, flat_bottom)

        assert sobolev_norm(residual, 0) < 1e-9

    def test_linear_part(self, small_grid):
        """Test linear_rhs equals rhs at tiny amplitude."""
        x = small_grid.x
        pair = FieldPair(1e-9 * np.exp(-x ** 2), np.zeros(small_grid.n), small_grid)
        full = evolve.rhs(pair, 0.0, AbcdParams(), BottomSpec(kind="zero"))
        lin = evolve.linear_rhs(pair, AbcdParams())

        np.testing.assert_allclose(full.u, lin.u, atol=1e-20)

    def test_bottom_forcing_on_rest_state(self, small_grid, gaussian_bottom):
        """Test a moving bottom forces a flat free surface."""
        out = evolve.rhs(FieldPair.zeros(small_grid), 0.5, AbcdParams(), gaussian_bottom)

        assert np.max(np.abs(out.eta)) > 0.0


class TestLinearPropagator:
    """Test the exact flat linear evolution."""

    def test_sigma_unit_for_equal_constants(self, grid):
        """Test sigma = 1 when a = c."""
        np.testing.assert_allclose(evolve.dispersion_sigma(grid, AbcdParams()), 1.0, atol=1e-14)

    def test_sigma_needs_negative_constants(self, grid):
        """Test a >= 0 is rejected."""
        with pytest.raises(ParameterError):
            evolve.dispersion_sigma(grid, AbcdParams(a=0.5))

    def test_d_alembert_for_equal_constants(self, grid):
        """Test sigma = 1 splits eta into two translating halves."""
        x = grid.x
        pair = FieldPair(np.exp(-x ** 2), np.zeros(grid.n), grid)
        out = evolve.linear_exact_step(pair, 5.0, AbcdParams())
        expected = 0.5 * (np.exp(-(x - 5.0) ** 2) + np.exp(-(x + 5.0) ** 2))

        np.testing.assert_allclose(out.eta, expected, atol=1e-12)

    def test_rk4_matches_exact_propagator(self, small_grid):
        """Test the nonlinear integrator at tiny amplitude follows the linear flow."""
        params = AbcdParams(a=-0.5, c=-2.0)
        x = small_grid.x
        amp = 1e-9
        state = FieldPair(amp * np.exp(-x ** 2), np.zeros(small_grid.n), small_grid)
        flat = BottomSpec(kind="zero")
        dt, steps = 0.01, 500
        numeric = state
        for j in range(steps):
            numeric = evolve.step_rk4(numeric, j * dt, dt, params, flat)
        exact = evolve.linear_exact_step(state, dt * steps, params)
        error = max(np.max(np.abs(numeric.eta - exact.eta)), np.max(np.abs(numeric.u - exact.u)))

        assert error < 1e-6 * amp


class TestSteppers:
    """Test the single-step integrators."""

    def test_split_agrees_with_rk4(self, stable_chen, flat_bottom):
        """Test both steppers advance the wave the same way."""
        dt = 0.01
        a = evolve.step_rk4(stable_chen.pair, 0.0, dt, stable_chen.params, flat_bottom)
        b = evolve.step_split(stable_chen.pair, 0.0, dt, stable_chen.params, flat_bottom)

        np.testing.assert_allclose(a.eta, b.eta, atol=1e-5)
        np.testing.assert_allclose(a.u, b.u, atol=1e-5)

    def test_blow_up(self, small_grid, flat_bottom):
        """Test non-finite states raise BlowUpError."""
        eta = np.zeros(small_grid.n)
        eta[5] = np.inf
        state = FieldPair(eta, np.zeros(small_grid.n), small_grid)

        with patch.object(evolve.logger, 'error') as mock_error:
            with pytest.raises(BlowUpError):
                evolve.step_rk4(state, 0.0, 0.01, AbcdParams(), flat_bottom)
            mock_error.assert_called_once()


class TestFrames:
    """Test centring and recentring."""

    def test_wave_center(self, stable_chen):
        """Test the centre of a shifted wave."""
        g = stable_chen.grid
        moved = shift_pair(stable_chen.pair, 10 * g.dx)

        assert evolve.wave_center(moved) == pytest.approx(10 * g.dx)

    def test_recenter(self, stable_chen):
        """Test recentring moves the wave to x = 0 and updates the offset."""
        moved = shift_pair(stable_chen.pair, 7.5)
        state, offset = evolve.recenter(moved, 2.0, 7.5)

        np.testing.assert_allclose(state.eta, stable_chen.R, atol=1e-12)
        assert offset == 9.5


class TestRun:
    """Test complete runs."""

    def test_snapshot_layout(self, stable_chen, flat_bottom):
        """Test uniform snapshots ending on t_end."""
        cfg = EvolveConfig(0.0, 1.0, dt=0.03, output_stride=4, diagnostics=False)
        out = evolve.run(stable_chen.pair, cfg, stable_chen.params, flat_bottom)

        assert out.times[-1] == pytest.approx(1.0)
        assert len(out.times) == len(out.snapshots)
        np.testing.assert_allclose(np.diff(out.times), 4 * out.dt)
        assert not out.rows

    def test_diagnostic_rows(self, stable_chen, flat_bottom):
        """Test a diagnostics row accompanies every snapshot."""
        cfg = EvolveConfig(0.0, 1.0, dt=0.05, output_stride=5)
        out = evolve.run(stable_chen.pair, cfg, stable_chen.params, flat_bottom)

        assert len(out.rows) == len(out.times)
        assert out.rows[-1].t == pytest.approx(1.0)

    def test_comoving_window(self, stable_chen, flat_bottom):
        """Test the comoving window tracks the wave in lab coordinates."""
        g = stable_chen.grid
        start = shift_pair(stable_chen.pair, 25.0)
        cfg = EvolveConfig(0.0, 20.0, output_stride=20, comoving=True, diagnostics=False)
        out = evolve.run(start, cfg, stable_chen.params, flat_bottom)
        lab = evolve.wave_center(out.snapshots[-1]) + out.offsets[-1]

        assert out.recenterings >= 1
        assert lab == pytest.approx(25.0 + stable_chen.omega * 20.0, abs=2 * g.dx)

    @pytest.mark.slow
    def test_conservation_and_shape(self, grid, flat_bottom):
        """Test H and P are conserved and the wave keeps its shape for T = 50."""
        chen = chen_profile(-1.0, "plus", grid)
        cfg = EvolveConfig(0.0, 50.0)
        out = evolve.run(chen.pair, cfg, chen.params, flat_bottom)
        final = out.snapshots[-1]
        H0, P0 = energy_H(chen.pair, chen.params), momentum_P(chen.pair)
        moved = shift(chen.R, grid, chen.omega * 50.0)

        assert abs(energy_H(final, chen.params) - H0) < 1e-6 * abs(H0)
        assert abs(momentum_P(final) - P0) < 1e-6 * abs(P0)
        assert np.max(np.abs(final.eta - moved)) < 1e-4
