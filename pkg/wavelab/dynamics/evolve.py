"""
Pseudo-spectral time evolution of the abcd system over the moving bottom.

    eta_t = -(1 - d^2)^-1 d_x (a u_xx + u + u (eta + h)) + (1 - d^2)^-1 (-1 + a1 d^2) h_t
    u_t   = -(1 - d^2)^-1 d_x (c eta_xx + eta + u^2/2) + c1 (1 - d^2)^-1 h_ttx

The grid may follow the wave: lab x = grid x + frame_offset, and the window is
re-centred by spectral translation when the wave nears the edge.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from wavelab.core.model import AbcdParams, BottomSpec, bottom_eval
from wavelab.core.spectral import FieldPair, GridSpec, shift
from wavelab.dynamics.diagnostics import DiagnosticsRow, diagnostics_row
from wavelab.errors import BlowUpError, ParameterError
from wavelab.logging_config import get_logger
from wavelab.telemetry import trace_operation

logger = get_logger(__name__)

STEPPERS = ("rk4", "splitstep")


@dataclass
class EvolveConfig:
    """Time-stepping settings; dt and output_stride default from the grid."""
    t_start: float
    t_end: float
    dt: Optional[float] = None
    dealias: bool = True
    output_stride: Optional[int] = None
    stepper: str = "rk4"
    comoving: bool = False
    recenter_margin: float = 30.0
    diagnostics: bool = True

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not self.t_end > self.t_start:
            raise ParameterError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if self.stepper not in STEPPERS:
            raise ParameterError(f"stepper must be one of {STEPPERS}, got '{self.stepper}'")
        if self.output_stride is not None and self.output_stride < 1:
            raise ParameterError("output_stride must be at least 1")

    def resolved_dt(self, grid: GridSpec) -> float:
        return self.dt if self.dt is not None else 0.25 * grid.dx

    def resolved_stride(self, dt: float) -> int:
        return self.output_stride if self.output_stride is not None else max(1, round(0.5 / dt))


@dataclass
class Trajectory:
    """Snapshots at uniform spacing; offsets[i] is the lab position of grid x = 0."""
    times: List[float] = field(default_factory=list)
    snapshots: List[FieldPair] = field(default_factory=list)
    offsets: List[float] = field(default_factory=list)
    rows: List[DiagnosticsRow] = field(default_factory=list)
    dt: float = 0.0
    recenterings: int = 0

    def append(self, t: float, state: FieldPair, offset: float, row: Optional[DiagnosticsRow]):
        self.times.append(t)
        self.snapshots.append(state)
        self.offsets.append(offset)
        if row is not None:
            self.rows.append(row)


class _Spectral:
    """Per-grid symbols of the flat linear part."""

    def __init__(self, grid: GridSpec, params: AbcdParams):
        k, k_odd = grid.k, grid.k_odd
        self.grid = grid
        self.helm_inv = 1.0 / (1.0 + k ** 2)
        self.ik_helm = 1j * k_odd * self.helm_inv
        self.eta_from_u = -1j * k_odd * (1.0 - params.a * k ** 2) * self.helm_inv
        self.u_from_eta = -1j * k_odd * (1.0 - params.c * k ** 2) * self.helm_inv
        self.mask = grid.dealias_mask


def _filtered(f: np.ndarray, sym: _Spectral) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(f) * sym.mask, n=sym.grid.n)


def _nonlinear_hat(state: FieldPair, h, sym: _Spectral, dealias: bool):
    eta, u = state.eta, state.u
    if dealias:
        eta, u = _filtered(eta, sym), _filtered(u, sym)
    n1 = np.fft.rfft(u * (eta + h))
    n2 = np.fft.rfft(0.5 * u * u)
    if dealias:
        n1, n2 = n1 * sym.mask, n2 * sym.mask
    return n1, n2


def _forcing_hat(t: float, x: np.ndarray, params: AbcdParams, spec: BottomSpec, sym: _Spectral):
    if spec.is_flat:
        return 0.0, 0.0
    h_t = bottom_eval(spec, t, x, ds=1)
    h_txx = bottom_eval(spec, t, x, ds=1, dy=2)
    h_ttx = bottom_eval(spec, t, x, ds=2, dy=1)
    f_eta = np.fft.rfft(-h_t + params.a1 * h_txx) * sym.helm_inv
    f_u = params.c1 * np.fft.rfft(h_ttx) * sym.helm_inv
    return f_eta, f_u


def rhs(
    state: FieldPair,
    t: float,
    params: AbcdParams,
    spec: BottomSpec,
    frame_offset: float = 0.0,
    dealias: bool = False,
    _sym: Optional[_Spectral] = None,
) -> FieldPair:
    """Instantaneous time derivative of (eta, u)."""
    grid = state.grid
    sym = _sym or _Spectral(grid, params)
    x = grid.x + frame_offset
    h = 0.0 if spec.is_flat else bottom_eval(spec, t, x)
    eta_hat = np.fft.rfft(state.eta)
    u_hat = np.fft.rfft(state.u)
    n1, n2 = _nonlinear_hat(state, h, sym, dealias)
    f_eta, f_u = _forcing_hat(t, x, params, spec, sym)
    d_eta = sym.eta_from_u * u_hat - sym.ik_helm * n1 + f_eta
    d_u = sym.u_from_eta * eta_hat - sym.ik_helm * n2 + f_u
    return FieldPair(np.fft.irfft(d_eta, n=grid.n), np.fft.irfft(d_u, n=grid.n), grid)


def linear_rhs(state: FieldPair, params: AbcdParams) -> FieldPair:
    """Flat-bottom linear part only."""
    sym = _Spectral(state.grid, params)
    n = state.grid.n
    return FieldPair(
        np.fft.irfft(sym.eta_from_u * np.fft.rfft(state.u), n=n),
        np.fft.irfft(sym.u_from_eta * np.fft.rfft(state.eta), n=n),
        state.grid,
    )


def pde_residual(
    state: FieldPair,
    state_dot: FieldPair,
    t: float,
    params: AbcdParams,
    spec: BottomSpec,
    frame_offset: float = 0.0,
) -> FieldPair:
    """S_h of a state with given time derivative: (1 - d^2)(state_dot - rhs(state))."""
    grid = state.grid
    defect = state_dot - rhs(state, t, params, spec, frame_offset)
    k2 = 1.0 + grid.k ** 2
    return defect.map(lambda f: np.fft.irfft(np.fft.rfft(f) * k2, n=grid.n))


def _check_finite(state: FieldPair, t: float):
    if not state.is_finite():
        logger.error("non-finite values in the evolution", t=t)
        raise BlowUpError(f"non-finite values at t={t}")


def _rk4(fn: Callable[[FieldPair, float], FieldPair], state: FieldPair, t: float, dt: float) -> FieldPair:
    k1 = fn(state, t)
    k2 = fn(state + (0.5 * dt) * k1, t + 0.5 * dt)
    k3 = fn(state + (0.5 * dt) * k2, t + 0.5 * dt)
    k4 = fn(state + dt * k3, t + dt)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(
    state: FieldPair,
    t: float,
    dt: float,
    params: AbcdParams,
    spec: BottomSpec,
    frame_offset: float = 0.0,
    dealias: bool = False,
) -> FieldPair:
    """Classical four-stage step; raises BlowUpError on NaN/Inf."""
    sym = _Spectral(state.grid, params)
    out = _rk4(lambda s, tau: rhs(s, tau, params, spec, frame_offset, dealias, sym), state, t, dt)
    _check_finite(out, t + dt)
    return out


def _linear_symbols(grid: GridSpec, params: AbcdParams):
    if params.a >= 0 or params.c >= 0:
        raise ParameterError("the exact linear propagator needs a < 0 and c < 0")
    k = grid.k
    p = (1.0 - params.a * k ** 2) / (1.0 + k ** 2)
    q = (1.0 - params.c * k ** 2) / (1.0 + k ** 2)
    sigma = np.sqrt(p * q)
    hk = np.sqrt((1.0 - params.a * k ** 2) / (1.0 - params.c * k ** 2))
    return sigma, hk


def dispersion_sigma(grid: GridSpec, params: AbcdParams) -> np.ndarray:
    """sigma(k) = sqrt((1 - a k^2)(1 - c k^2)) / (1 + k^2)."""
    return _linear_symbols(grid, params)[0]


def linear_exact_step(state: FieldPair, dt: float, params: AbcdParams) -> FieldPair:
    """
    Exact flat-bottom linear evolution over dt.

    eta = h(k)(v + w), u = v - w diagonalizes the system; v and w move with
    phases exp(-+ i k sigma dt).
    """
    grid = state.grid
    sigma, hk = _linear_symbols(grid, params)
    eta_hat = np.fft.rfft(state.eta)
    u_hat = np.fft.rfft(state.u)
    v = 0.5 * (eta_hat / hk + u_hat)
    w = 0.5 * (eta_hat / hk - u_hat)
    phase = np.exp(-1j * grid.k_odd * sigma * dt)
    v, w = v * phase, w * np.conj(phase)
    return FieldPair(
        np.fft.irfft(hk * (v + w), n=grid.n),
        np.fft.irfft(v - w, n=grid.n),
        grid,
    )


def step_split(
    state: FieldPair,
    t: float,
    dt: float,
    params: AbcdParams,
    spec: BottomSpec,
    frame_offset: float = 0.0,
    dealias: bool = False,
) -> FieldPair:
    """Strang splitting: exact linear half steps around an RK4 step of the remainder."""
    sym = _Spectral(state.grid, params)

    def remainder(s: FieldPair, tau: float) -> FieldPair:
        return rhs(s, tau, params, spec, frame_offset, dealias, sym) - linear_rhs(s, params)

    half = linear_exact_step(state, 0.5 * dt, params)
    mid = _rk4(remainder, half, t, dt)
    out = linear_exact_step(mid, 0.5 * dt, params)
    _check_finite(out, t + dt)
    return out


def wave_center(state: FieldPair) -> float:
    """Grid position of the largest eta^2 + u^2."""
    density = state.eta ** 2 + state.u ** 2
    return float(state.grid.x[int(np.argmax(density))])


def recenter(state: FieldPair, frame_offset: float, center: float):
    """Translate the window so that `center` moves to grid x = 0."""
    moved = state.map(lambda f: shift(f, state.grid, -center))
    return moved, frame_offset + center


def run(
    initial: FieldPair,
    config: EvolveConfig,
    params: AbcdParams,
    spec: BottomSpec,
    frame_offset: float = 0.0,
    psi: Optional[np.ndarray] = None,
) -> Trajectory:
    """
    Evolve from config.t_start to config.t_end and collect snapshots.

    The step count is rounded up to a multiple of the snapshot stride, so
    snapshots are uniformly spaced and the last one lands on t_end.
    """
    grid = initial.grid
    dt = config.resolved_dt(grid)
    stride = config.resolved_stride(dt)
    span = config.t_end - config.t_start
    n_steps = stride * max(1, math.ceil(span / (dt * stride)))
    dt = span / n_steps
    stepper = step_rk4 if config.stepper == "rk4" else step_split

    trajectory = Trajectory(dt=dt)
    state, offset, t = initial, frame_offset, config.t_start

    def record():
        row = diagnostics_row(state, t, params, spec, offset, psi) if config.diagnostics else None
        trajectory.append(t, state, offset, row)

    _check_finite(state, t)
    record()
    logger.info(
        "evolution started",
        t_start=config.t_start,
        t_end=config.t_end,
        dt=dt,
        steps=n_steps,
        stride=stride,
        stepper=config.stepper,
        n=grid.n,
    )
    with trace_operation("evolve_run", {"steps": n_steps, "n": grid.n}):
        for step in range(1, n_steps + 1):
            state = stepper(state, t, dt, params, spec, offset, config.dealias)
            t = config.t_start + step * dt
            if config.comoving:
                center = wave_center(state)
                if abs(center) > grid.half_length - config.recenter_margin:
                    state, offset = recenter(state, offset, center)
                    trajectory.recenterings += 1
                    logger.info("window recentred", t=t, frame_offset=offset, shift=center)
            if step % stride == 0:
                record()
    logger.info("evolution finished", t=t, snapshots=len(trajectory.times))
    return trajectory
