"""
Modulation tracking: split an evolving state into a shifted solitary wave plus a remainder.

The shift rho (and optionally the speed omega) is fixed by orthogonality of
the remainder to the translation mode Q' and to J (1 - d^2) Q. Positions
returned by the fits are grid coordinates; track() converts them to lab
coordinates with the snapshot offsets.
"""

import math
import threading
from concurrent.futures import Future
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from wavelab.core.model import AbcdParams, BottomSpec, sonic_speed
from wavelab.core.spectral import FieldPair, GridSpec, deriv, h1h1_norm, helmholtz, inner, shift_pair
from wavelab.dynamics.diagnostics import diagnostics_row, modulated_F2
from wavelab.dynamics.evolve import Trajectory
from wavelab.errors import ConvergenceError, ParameterError
from wavelab.logging_config import get_logger
from wavelab.telemetry import trace_operation
from wavelab.waves.linop import check_subsonic
from wavelab.waves.solitary import SolitonProfile, chen_profile_at, continue_profile

logger = get_logger(__name__)

MODES = ("shift-only", "shift-speed")
SHIFT_TOL = 1e-10
MAX_ITER = 40
TUBE_FRACTION = 0.5
JUMP_FACTOR = 5.0


class ProfileFamily:
    """
    Solitary waves at arbitrary speed.

    Chen parameters give the exact wave; otherwise Newton profiles on an
    omega lattice are interpolated linearly. Speeds below the first node or
    above the last subsonic one are extrapolated from the nearest pair.
    """

    def __init__(self, params: AbcdParams, grid: GridSpec, sign: str = "plus", spacing: float = 1e-3):
        if spacing <= 0:
            raise ParameterError("lattice spacing must be positive")
        self.params = params
        self.grid = grid
        self.sign = sign
        self.spacing = spacing
        self._nodes: Dict[int, "Future[SolitonProfile]"] = {}
        self._lock = threading.Lock()

    def _node(self, index: int) -> SolitonProfile:
        with self._lock:
            pending = self._nodes.get(index)
            owner = pending is None
            if owner:
                pending = self._nodes[index] = Future()
        if owner:
            try:
                pending.set_result(continue_profile(self.params, index * self.spacing, self.grid, self.sign))
            except BaseException as exc:
                with self._lock:
                    del self._nodes[index]
                pending.set_exception(exc)
        return pending.result()

    def _bracket(self, omega: float) -> Tuple[int, float]:
        """Lower lattice index and weight; ends extrapolate from the nearest subsonic pair."""
        position = omega / self.spacing
        top = math.ceil(sonic_speed(self.params) / self.spacing) - 2
        if top < 1:
            raise ParameterError(f"lattice spacing {self.spacing} too coarse for the subsonic interval")
        j = min(max(int(math.floor(position)), 1), top)
        return j, position - j

    def profile_at(self, omega: float) -> SolitonProfile:
        check_subsonic(omega, self.params)
        if self.params.is_chen:
            return chen_profile_at(omega, self.sign, self.grid)
        j, w = self._bracket(omega)
        lo, hi = self._node(j), self._node(j + 1)
        return SolitonProfile(
            omega,
            "interpolated",
            (1 - w) * lo.R + w * hi.R,
            (1 - w) * lo.Q + w * hi.Q,
            self.grid,
            self.params,
        )


def _dx_pair(p: FieldPair, order: int = 1) -> FieldPair:
    return p.map(lambda f: deriv(f, p.grid, order))


def _helm_pair(p: FieldPair) -> FieldPair:
    return p.map(lambda f: helmholtz(f, p.grid))


def momentum_vector(profile_pair: FieldPair) -> FieldPair:
    """J (1 - d^2) (R, Q) = ((1 - d^2) Q, (1 - d^2) R)."""
    return _helm_pair(profile_pair).swapped()


def correlation_guess(state: FieldPair, profile: SolitonProfile) -> float:
    """Grid shift maximising the circular cross-correlation with the profile."""
    n = state.grid.n
    corr = np.zeros(n)
    for s, q in ((state.eta, profile.R), (state.u, profile.Q)):
        corr += np.fft.irfft(np.fft.rfft(s) * np.conj(np.fft.rfft(q)), n=n)
    m = int(np.argmax(corr))
    if m > n // 2:
        m -= n
    return m * state.grid.dx


def _direction(profile: SolitonProfile, weighted: bool) -> FieldPair:
    d = _dx_pair(profile.pair)
    return _helm_pair(d) if weighted else d


def orthogonality_defects(state: FieldPair, profile: SolitonProfile, rho: float) -> Tuple[float, float]:
    """Normalised pairings of the remainder with Q' and with (1 - d^2) Q', at shift rho."""
    remainder = state - shift_pair(profile.pair, rho)
    plain = shift_pair(_direction(profile, False), rho)
    weighted = shift_pair(_direction(profile, True), rho)
    return (
        abs(inner(remainder, plain)) / inner(plain, plain),
        abs(inner(remainder, weighted)) / inner(weighted, weighted),
    )


def _tube_check(state: FieldPair, profile: SolitonProfile, rho: float, tube_fraction: float) -> float:
    residual = h1h1_norm(state - shift_pair(profile.pair, rho))
    radius = tube_fraction * h1h1_norm(profile.pair)
    if residual > radius:
        raise ConvergenceError(
            f"state left the solitary-wave tube: residual {residual:.3e} > {radius:.3e}"
        )
    return residual


def fit_shift(
    state: FieldPair,
    profile: SolitonProfile,
    rho_guess: Optional[float] = None,
    weighted: bool = False,
    tol: float = SHIFT_TOL,
    max_iter: int = MAX_ITER,
    tube_fraction: float = TUBE_FRACTION,
) -> float:
    """
    Newton root of g(rho) = <state - Q(. - rho), Q'(. - rho)>.

    Raises:
        ConvergenceError: no convergence, g'(rho) ~ 0, or the state is outside the tube
    """
    if state.grid != profile.grid:
        raise ParameterError("state and profile live on different grids")
    rho = correlation_guess(state, profile) if rho_guess is None else float(rho_guess)
    direction = _direction(profile, weighted)
    slope_dir = _dx_pair(direction)
    scale = inner(direction, direction)
    width = state.grid.half_length

    for iteration in range(1, max_iter + 1):
        g = inner(state, shift_pair(direction, rho))
        if abs(g) < tol * scale:
            break
        dg = -inner(state, shift_pair(slope_dir, rho))
        if abs(dg) < 1e-14 * scale:
            raise ConvergenceError(f"shift equation is degenerate at rho={rho}")
        step = g / dg
        rho -= step
        if abs(rho) > width:
            raise ConvergenceError(f"shift Newton diverged (rho={rho})")
    else:
        raise ConvergenceError(f"shift Newton did not converge in {max_iter} iterations (|g|={abs(g):.3e})")

    _tube_check(state, profile, rho, tube_fraction)
    return rho


def _speed_conditions(state: FieldPair, family: ProfileFamily, omega: float, rho: float) -> np.ndarray:
    profile = family.profile_at(omega)
    remainder = state - shift_pair(profile.pair, rho)
    return np.array([
        inner(remainder, shift_pair(_direction(profile, False), rho)),
        inner(remainder, shift_pair(momentum_vector(profile.pair), rho)),
    ])


def fit_shift_speed(
    state: FieldPair,
    family: ProfileFamily,
    omega_guess: float,
    rho_guess: Optional[float] = None,
    tol: float = SHIFT_TOL,
    max_iter: int = MAX_ITER,
    fd_step: float = 1e-5,
    tube_fraction: float = TUBE_FRACTION,
) -> Tuple[float, float]:
    """
    2-D Newton on <remainder, Q'> = <remainder, J (1 - d^2) Q> = 0.

    The Jacobian is a centred finite difference in (omega, rho).

    Raises:
        ConvergenceError: singular Jacobian or no convergence
    """
    omega = float(omega_guess)
    if rho_guess is None:
        rho_guess = correlation_guess(state, family.profile_at(omega))
    rho = float(rho_guess)
    translation = _direction(family.profile_at(omega), False)
    scale = inner(translation, translation)

    for iteration in range(1, max_iter + 1):
        G = _speed_conditions(state, family, omega, rho)
        if np.max(np.abs(G)) < tol * scale:
            break
        jac = np.empty((2, 2))
        jac[:, 0] = (
            _speed_conditions(state, family, omega + fd_step, rho)
            - _speed_conditions(state, family, omega - fd_step, rho)
        ) / (2.0 * fd_step)
        jac[:, 1] = (
            _speed_conditions(state, family, omega, rho + fd_step)
            - _speed_conditions(state, family, omega, rho - fd_step)
        ) / (2.0 * fd_step)
        if abs(np.linalg.det(jac)) < 1e-12 * np.max(np.abs(jac)) ** 2:
            raise ConvergenceError(f"modulation Jacobian is singular at omega={omega}, rho={rho}")
        d_omega, d_rho = np.linalg.solve(jac, -G)
        omega += d_omega
        rho += d_rho
        logger.debug("shift-speed iteration", iteration=iteration, omega=omega, rho=rho)
    else:
        raise ConvergenceError(f"shift-speed Newton did not converge in {max_iter} iterations")

    _tube_check(state, family.profile_at(omega), rho, tube_fraction)
    return omega, rho


@dataclass
class ModulationTrack:
    """Fitted modulation parameters (lab frame) and remainder norms per snapshot."""
    mode: str = "shift-only"
    times: List[float] = field(default_factory=list)
    rho: List[float] = field(default_factory=list)
    omega: List[float] = field(default_factory=list)
    residual_h1h1: List[float] = field(default_factory=list)
    defect: List[float] = field(default_factory=list)
    weighted_defect: List[float] = field(default_factory=list)

    def append(self, t, rho, omega, residual, defect, weighted_defect):
        self.times.append(t)
        self.rho.append(rho)
        self.omega.append(omega)
        self.residual_h1h1.append(residual)
        self.defect.append(defect)
        self.weighted_defect.append(weighted_defect)

    def rho_slope(self) -> np.ndarray:
        return np.gradient(np.asarray(self.rho), np.asarray(self.times))

    def max_residual(self, after: Optional[float] = None) -> float:
        t = np.asarray(self.times)
        r = np.asarray(self.residual_h1h1)
        keep = t >= after if after is not None else slice(None)
        return float(np.max(r[keep]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times,
            "omega": self.omega,
            "rho": self.rho,
            "residual": self.residual_h1h1,
            "defect": self.defect,
            "weighted_defect": self.weighted_defect,
        })


def track(
    trajectory: Trajectory,
    family: ProfileFamily,
    reference_omega: float,
    mode: str = "shift-only",
    weighted_pairing: bool = False,
    jump_factor: float = JUMP_FACTOR,
) -> ModulationTrack:
    """
    Warm-started fits across the snapshots of a trajectory.

    Each fit starts from the previous lab position advanced by omega dt; a
    fitted position further than jump_factor * dx from that prediction is
    reported as a failure.

    Raises:
        ConvergenceError: a fit fails or the shift jumps
    """
    if mode not in MODES:
        raise ParameterError(f"tracking mode must be one of {MODES}, got '{mode}'")
    result = ModulationTrack(mode=mode)
    omega = reference_omega
    previous: Optional[Tuple[float, float]] = None

    with trace_operation("track", {"snapshots": len(trajectory.times), "mode": mode}):
        for t, state, offset in zip(trajectory.times, trajectory.snapshots, trajectory.offsets):
            dx = state.grid.dx
            predicted = None if previous is None else previous[1] + omega * (t - previous[0])
            guess = None if predicted is None else predicted - offset
            try:
                if mode == "shift-speed":
                    omega, rho_grid = fit_shift_speed(state, family, omega, guess)
                else:
                    rho_grid = fit_shift(state, family.profile_at(omega), guess, weighted=weighted_pairing)
            except ConvergenceError as exc:
                logger.error("modulation fit failed", error=exc, t=t)
                raise
            rho_lab = rho_grid + offset
            if predicted is not None and abs(rho_lab - predicted) > jump_factor * dx:
                logger.error("shift jumped between snapshots", t=t, rho=rho_lab, predicted=predicted)
                raise ConvergenceError(
                    f"shift jumped at t={t}: {rho_lab:.4f} vs predicted {predicted:.4f}"
                )
            profile = family.profile_at(omega)
            residual = h1h1_norm(state - shift_pair(profile.pair, rho_grid))
            plain, weighted = orthogonality_defects(state, profile, rho_grid)
            result.append(t, rho_lab, omega, residual, plain, weighted)
            previous = (t, rho_lab)

    logger.info(
        "tracking finished",
        snapshots=len(result.times),
        mode=mode,
        max_residual=max(result.residual_h1h1) if result.residual_h1h1 else 0.0,
    )
    return result


def lyapunov_series(
    trajectory: Trajectory,
    modulation: ModulationTrack,
    family: ProfileFamily,
    spec: BottomSpec,
    reference_omega: float,
) -> np.ndarray:
    """
    F2 at every tracked snapshot, stored in the trajectory's diagnostics rows.

    The profile is the family member at the fitted speed; rho2 is the lab
    shift minus reference_omega * t.
    """
    if len(modulation.times) != len(trajectory.times):
        raise ParameterError("modulation track and trajectory have different lengths")
    rows_present = len(trajectory.rows) == len(trajectory.times)
    values = np.empty(len(trajectory.times))
    if not values.size:
        return values
    for i, (t, state, offset) in enumerate(zip(trajectory.times, trajectory.snapshots, trajectory.offsets)):
        profile = family.profile_at(modulation.omega[i])
        rho = modulation.rho[i]
        rho2 = rho - reference_omega * t
        if rows_present:
            trajectory.rows[i].F2 = modulated_F2(state, profile, rho, rho2, family.params, spec, t, offset)
        else:
            trajectory.rows.append(
                diagnostics_row(state, t, family.params, spec, offset, reference=(profile, rho, rho2))
            )
        values[i] = trajectory.rows[i].F2
    logger.info("lyapunov functional evaluated", snapshots=len(values), F2_min=float(np.min(values)),
                F2_max=float(np.max(values)))
    return values
