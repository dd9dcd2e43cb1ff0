"""
Unit tests for modulation tracking.
"""
import math
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from unittest.mock import patch

from wavelab.core.model import AbcdParams
from wavelab.core.spectral import FieldPair, shift_pair
from wavelab.dynamics import tracker
from wavelab.dynamics.evolve import EvolveConfig, Trajectory, run
from wavelab.dynamics.tracker import ModulationTrack, ProfileFamily
from wavelab.errors import ConvergenceError, ParameterError
from wavelab.waves import solitary


@pytest.fixture(scope="module")
def chen_family(small_grid):
    return ProfileFamily(AbcdParams(), small_grid)


class TestFitShift:
    """Test the one-parameter fit."""

    def test_exact_shift(self, stable_chen):
        """Test a translated wave returns its translation."""
        state = shift_pair(stable_chen.pair, 3.7)

        assert tracker.fit_shift(state, stable_chen) == pytest.approx(3.7, abs=1e-8)

    def test_even_perturbation_keeps_shift(self, stable_chen, small_grid):
        """Test a perturbation even about the crest leaves rho unchanged."""
        x = small_grid.x
        bump = FieldPair(0.01 * np.exp(-x ** 2), 0.01 * np.exp(-0.5 * x ** 2), small_grid)
        state = shift_pair(stable_chen.pair + bump, -2.5)
        rho = tracker.fit_shift(state, stable_chen)

        assert rho == pytest.approx(-2.5, abs=1e-8)
        plain, _ = tracker.orthogonality_defects(state, stable_chen, rho)
        assert plain < 1e-8

    def test_outside_tube(self, stable_chen):
        """Test a state far from the wave family is refused."""
        state = stable_chen.pair * 0.4

        with pytest.raises(ConvergenceError):
            tracker.fit_shift(state, stable_chen)

    def test_shift_equivariance(self, stable_chen, small_grid):
        """Test fitting a translated state adds the translation."""
        x = small_grid.x
        bump = FieldPair(0.02 * np.exp(-(x - 1.0) ** 2), np.zeros(small_grid.n), small_grid)
        state = stable_chen.pair + bump
        base = tracker.fit_shift(state, stable_chen)
        moved = tracker.fit_shift(shift_pair(state, 4.2), stable_chen)

        assert moved - base == pytest.approx(4.2, abs=1e-9)

    def test_idempotent(self, stable_chen):
        """Test restarting from the fitted value returns it unchanged."""
        state = shift_pair(stable_chen.pair, 1.3)
        rho = tracker.fit_shift(state, stable_chen)

        assert tracker.fit_shift(state, stable_chen, rho_guess=rho) == rho

    def test_weighted_pairing(self, stable_chen):
        """Test the weighted pairing locates the same exact wave."""
        state = shift_pair(stable_chen.pair, -1.1)

        assert tracker.fit_shift(state, stable_chen, weighted=True) == pytest.approx(-1.1, abs=1e-8)


class TestFitShiftSpeed:
    """Test the two-parameter fit."""

    def test_recovers_speed_and_shift(self, chen_family, small_grid):
        """Test (omega, rho) of an exact wave from a nearby start."""
        state = shift_pair(solitary.chen_profile_at(0.5, "plus", small_grid).pair, -2.0)
        omega, rho = tracker.fit_shift_speed(state, chen_family, 0.48, -1.8)

        assert omega == pytest.approx(0.5, abs=1e-6)
        assert rho == pytest.approx(-2.0, abs=1e-6)


class TestProfileFamily:
    """Test profiles at arbitrary speed."""

    def test_chen_family_exact(self, chen_family):
        """Test Chen constants give the explicit wave."""
        profile = chen_family.profile_at(0.45)

        assert profile.is_analytic
        assert profile.omega == pytest.approx(0.45)

    def test_interpolated_profile(self, small_grid):
        """Test lattice interpolation for non-Chen constants."""
        params = AbcdParams(a=-0.8, c=-1.2)
        family = ProfileFamily(params, small_grid, spacing=1e-2)
        profile = family.profile_at(0.505)
        direct = solitary.continue_profile(params, 0.505, small_grid)

        assert profile.branch == "interpolated"
        assert len(family._nodes) == 2
        np.testing.assert_allclose(profile.R, direct.R, atol=1e-3)
        np.testing.assert_allclose(profile.Q, direct.Q, atol=1e-3)

    def test_speed_below_first_node(self, small_grid, stable_chen):
        """Test speeds under one lattice step use nodes 1 and 2, never omega = 0."""
        family = ProfileFamily(AbcdParams(a=-0.8, c=-1.2), small_grid, spacing=1e-2)
        requested = []

        def fake(params, omega, grid, sign):
            requested.append(omega)
            return stable_chen

        with patch.object(tracker, 'continue_profile', side_effect=fake):
            profile = family.profile_at(0.004)

        assert sorted(requested) == pytest.approx([0.01, 0.02])
        assert profile.omega == 0.004
        np.testing.assert_allclose(profile.R, stable_chen.R)

    def test_bracket_ends(self, small_grid):
        """Test the lattice pair stays strictly subsonic at both ends."""
        params = AbcdParams(a=-0.8, c=-1.2)
        family = ProfileFamily(params, small_grid, spacing=1e-2)

        assert family._bracket(0.004) == (1, pytest.approx(-0.6))
        assert family._bracket(0.505) == (50, pytest.approx(0.5))
        j, w = family._bracket(0.979)
        assert (j + 1) * 1e-2 < math.sqrt(0.96)
        assert w > 1.0

    def test_concurrent_nodes(self, small_grid, stable_chen):
        """Test two threads building different nodes do not wait on each other."""
        family = ProfileFamily(AbcdParams(a=-0.8, c=-1.2), small_grid, spacing=1e-2)
        barrier = threading.Barrier(2, timeout=10)

        def fake(params, omega, grid, sign):
            barrier.wait()
            return stable_chen

        with patch.object(tracker, 'continue_profile', side_effect=fake):
            with ThreadPoolExecutor(max_workers=2) as pool:
                built = list(pool.map(family._node, [10, 20]))

        assert all(p is stable_chen for p in built)
        assert sorted(family._nodes) == [10, 20]

    def test_invalid_spacing(self, small_grid):
        """Test a non-positive spacing is rejected."""
        with pytest.raises(ParameterError):
            ProfileFamily(AbcdParams(), small_grid, spacing=0.0)


class TestTrack:
    """Test tracking across trajectories."""

    def test_flat_run(self, stable_chen, chen_family, flat_bottom):
        """Test the shift grows like omega t over a flat bottom."""
        cfg = EvolveConfig(0.0, 5.0, output_stride=10, diagnostics=False)
        out = run(stable_chen.pair, cfg, stable_chen.params, flat_bottom)
        result = tracker.track(out, chen_family, stable_chen.omega)

        np.testing.assert_allclose(result.rho, stable_chen.omega * np.asarray(out.times), atol=1e-4)
        assert result.max_residual() < 1e-3
        np.testing.assert_allclose(result.rho_slope(), stable_chen.omega, atol=1e-3)

    def test_jump_detected(self, stable_chen, chen_family):
        """Test a sudden displacement is reported as a failure."""
        pair = stable_chen.pair
        traj = Trajectory(times=[0.0, 1.0], snapshots=[pair, shift_pair(pair, 3.0)], offsets=[0.0, 0.0])

        with patch.object(tracker.logger, 'error') as mock_error:
            with pytest.raises(ConvergenceError):
                tracker.track(traj, chen_family, stable_chen.omega)
            mock_error.assert_called_once()

    def test_unknown_mode(self, chen_family):
        """Test invalid modes raise ParameterError."""
        with pytest.raises(ParameterError):
            tracker.track(Trajectory(), chen_family, 0.5, mode="bogus")

    def test_lab_offsets(self, stable_chen, chen_family):
        """Test grid shifts are converted with the snapshot offsets."""
        pair = stable_chen.pair
        traj = Trajectory(times=[0.0, 1.0], snapshots=[pair, pair], offsets=[10.0, 10.0 + stable_chen.omega])
        result = tracker.track(traj, chen_family, stable_chen.omega, mode="shift-speed")

        assert result.rho == pytest.approx([10.0, 10.0 + stable_chen.omega], abs=1e-8)
        assert result.omega[-1] == pytest.approx(stable_chen.omega, abs=1e-8)


class TestModulationTrack:
    """Test the result container."""

    def test_frame(self):
        """Test frame columns and the post-window maximum."""
        result = ModulationTrack()
        result.append(0.0, 0.0, 0.5, 0.1, 0.0, 0.0)
        result.append(1.0, 0.5, 0.5, 0.02, 0.0, 0.0)
        frame = result.to_frame()

        assert list(frame.columns) == ["t", "omega", "rho", "residual", "defect", "weighted_defect"]
        assert result.max_residual() == 0.1
        assert result.max_residual(after=0.5) == 0.02


class TestLyapunovSeries:
    """Test F2 along tracked runs."""

    def test_tracked_run_fills_rows(self, stable_chen, chen_family, flat_bottom):
        """Test every diagnostics row of a tracked flat run gets a finite F2."""
        cfg = EvolveConfig(0.0, 2.0, output_stride=10)
        out = run(stable_chen.pair, cfg, stable_chen.params, flat_bottom)
        result = tracker.track(out, chen_family, stable_chen.omega)

        values = tracker.lyapunov_series(out, result, chen_family, flat_bottom, stable_chen.omega)

        assert np.all(np.isfinite(values))
        assert [row.F2 for row in out.rows] == list(values)
        assert np.max(np.abs(values)) < 1e-6

    def test_rows_built_without_diagnostics(self, stable_chen, chen_family, flat_bottom):
        """Test rows are created when the run kept none."""
        cfg = EvolveConfig(0.0, 1.0, output_stride=10, diagnostics=False)
        out = run(stable_chen.pair, cfg, stable_chen.params, flat_bottom)
        result = tracker.track(out, chen_family, stable_chen.omega)

        values = tracker.lyapunov_series(out, result, chen_family, flat_bottom, stable_chen.omega)

        assert len(out.rows) == len(out.times) == len(values)
        assert all(row.F2 is not None for row in out.rows)

    def test_length_mismatch(self, stable_chen, chen_family, flat_bottom):
        """Test a track from another trajectory is refused."""
        traj = Trajectory(times=[0.0], snapshots=[stable_chen.pair], offsets=[0.0])

        with pytest.raises(ParameterError):
            tracker.lyapunov_series(traj, ModulationTrack(), chen_family, flat_bottom, stable_chen.omega)
