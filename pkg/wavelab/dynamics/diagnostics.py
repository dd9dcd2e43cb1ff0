"""
Conserved and monitored functionals of the abcd flow.

Every routine takes the state on the grid together with the lab-frame offset
of the grid (lab x = grid x + frame_offset), so the bottom is always
evaluated where the water actually is.
"""

from dataclasses import dataclass, asdict
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
from scipy.integrate import fixed_quad

from wavelab.core.model import AbcdParams, BottomSpec, bottom_eval, bottom_h0
from wavelab.core.spectral import FieldPair, deriv, helmholtz, helmholtz_inv, integrate, shift, shift_pair
from wavelab.errors import ParameterError

if TYPE_CHECKING:
    from wavelab.waves.solitary import SolitonProfile

M0_QUADRATURE_NODES = 16

DIAGNOSTIC_COLUMNS = (
    "t", "H", "H_h", "P", "dHh_dt_analytic", "dP_dt_analytic",
    "mass_eta", "mass_u", "E_loc", "F2",
)


def _lab_x(state: FieldPair, frame_offset: float) -> np.ndarray:
    return state.grid.x + frame_offset


def _energy_density(state: FieldPair, params: AbcdParams, h) -> np.ndarray:
    g = state.grid
    eta_x = deriv(state.eta, g)
    u_x = deriv(state.u, g)
    return (
        -params.a * u_x ** 2
        - params.c * eta_x ** 2
        + state.u ** 2
        + state.eta ** 2
        + state.u ** 2 * (state.eta + h)
    )


def energy_H(state: FieldPair, params: AbcdParams) -> float:
    """H = 1/2 int (-a u_x^2 - c eta_x^2 + u^2 + eta^2 + u^2 eta)."""
    return 0.5 * integrate(_energy_density(state, params, 0.0), state.grid)


def energy_Hh(
    state: FieldPair,
    params: AbcdParams,
    spec: BottomSpec,
    t: float,
    frame_offset: float = 0.0,
) -> float:
    """Modified energy: eta -> eta + h inside the cubic term only."""
    h = bottom_eval(spec, t, _lab_x(state, frame_offset))
    return 0.5 * integrate(_energy_density(state, params, h), state.grid)


def momentum_P(state: FieldPair) -> float:
    """P = int (eta u + eta_x u_x)."""
    return integrate(state.eta * helmholtz(state.u, state.grid), state.grid)


def dHh_dt_rhs(
    state: FieldPair,
    params: AbcdParams,
    spec: BottomSpec,
    t: float,
    frame_offset: float = 0.0,
) -> float:
    """Exact time derivative of H_h along the flow (zero for a time-independent bottom)."""
    if spec.is_flat:
        return 0.0
    g = state.grid
    x = _lab_x(state, frame_offset)
    eta, u = state.eta, state.u
    h = bottom_eval(spec, t, x)
    psi = bottom_eval(spec, t, x, ds=1)
    psi_x = bottom_eval(spec, t, x, ds=1, dy=1)
    phi = bottom_eval(spec, t, x, ds=2, dy=1)
    g_phi = helmholtz_inv(phi, g)
    g_psi = helmholtz_inv(psi, g)
    a, c, a1, c1 = params.a, params.c, params.a1, params.c1
    mixed = (1.0 + c) * eta + 0.5 * u ** 2

    total = (
        -a * c1 * integrate(u * phi, g)
        + c1 * integrate((1.0 + a + eta + h) * u * g_phi, g)
        + c * integrate(eta * psi, g)
        + c * a1 * integrate(deriv(eta, g) * psi_x, g)
        + (a1 - 1.0) * integrate(mixed * g_psi, g)
        - a1 * integrate(mixed * psi, g)
        + 0.5 * integrate(u ** 2 * psi, g)
    )
    return float(total)


def dP_dt_rhs(
    state: FieldPair,
    params: AbcdParams,
    spec: BottomSpec,
    t: float,
    frame_offset: float = 0.0,
) -> float:
    """dP/dt = -1/2 int h_x u^2 - int u (1 - a1 d^2) h_t - c1 int eta_x h_tt."""
    if spec.is_flat:
        return 0.0
    g = state.grid
    x = _lab_x(state, frame_offset)
    h_x = bottom_eval(spec, t, x, dy=1)
    h_t = bottom_eval(spec, t, x, ds=1)
    h_txx = bottom_eval(spec, t, x, ds=1, dy=2)
    h_tt = bottom_eval(spec, t, x, ds=2)
    return float(
        -0.5 * integrate(h_x * state.u ** 2, g)
        - integrate(state.u * (h_t - params.a1 * h_txx), g)
        - params.c1 * integrate(deriv(state.eta, g) * h_tt, g)
    )


def local_energy(
    state: FieldPair,
    psi: np.ndarray,
    params: AbcdParams,
    spec: BottomSpec,
    t: float,
    frame_offset: float = 0.0,
) -> float:
    """Energy density of H_h weighted by a nonnegative bounded psi."""
    psi = np.asarray(psi, dtype=float)
    if np.any(psi < 0):
        raise ParameterError("local energy weight must be nonnegative")
    h = bottom_eval(spec, t, _lab_x(state, frame_offset))
    return 0.5 * integrate(psi * _energy_density(state, params, h), state.grid)


def m0_eval(tau: float, rho2: float, rho: float, spec: BottomSpec) -> float:
    """
    Coefficient -eps^2 rho2 int_0^1 d_s h0(eps (tau + sigma rho2), eps rho) dsigma.

    Fixed 16-point Gauss-Legendre rule in sigma.
    """
    if rho2 == 0.0 or spec.is_flat:
        return 0.0
    eps = spec.epsilon

    def integrand(sigma):
        return bottom_h0(spec, eps * (tau + sigma * rho2), eps * rho, ds=1)

    value, _ = fixed_quad(integrand, 0.0, 1.0, n=M0_QUADRATURE_NODES)
    return float(-eps ** 2 * rho2 * value)


def lyapunov_F2(
    eta2: FieldPair,
    U: FieldPair,
    profile: "SolitonProfile",
    rho: float,
    m0: float,
    spec: BottomSpec,
    tau: float,
    params: AbcdParams,
    frame_offset: float = 0.0,
) -> float:
    """
    Lyapunov functional of the perturbation eta2 around the modulated wave.

    U and eta2 are sampled on the grid (U already centred at rho); the speed
    is the profile's. The bottom in the cubic term is taken at the lab x.
    """
    g = eta2.grid
    e, w = eta2.eta, eta2.u
    e_x = deriv(e, g)
    w_x = deriv(w, g)
    h = bottom_eval(spec, tau, _lab_x(eta2, frame_offset))

    quadratic = 0.5 * integrate(-params.a * w_x ** 2 - params.c * e_x ** 2 + w ** 2 + e ** 2, g)
    coupling = 0.5 * integrate(2.0 * U.u * e * w + U.eta * w ** 2, g)
    cubic = 0.5 * integrate(w ** 2 * (e + h), g)
    momentum = -profile.omega * integrate(e_x * w_x + e * w, g)
    total = quadratic + coupling + cubic + momentum
    if m0 != 0.0:
        q_shifted = shift(profile.Q, g, rho - frame_offset)
        total -= m0 * integrate(q_shifted * w, g)
    return float(total)


def modulated_F2(
    state: FieldPair,
    profile: "SolitonProfile",
    rho: float,
    rho2: float,
    params: AbcdParams,
    spec: BottomSpec,
    t: float,
    frame_offset: float = 0.0,
) -> float:
    """F2 of the remainder after removing the profile centred at lab position rho."""
    U = shift_pair(profile.pair, rho - frame_offset)
    m0 = m0_eval(t, rho2, rho, spec)
    return lyapunov_F2(state - U, U, profile, rho, m0, spec, t, params, frame_offset)


@dataclass
class DiagnosticsRow:
    """One row of the diagnostics table."""
    t: float
    H: float
    H_h: float
    P: float
    dHh_dt_analytic: float
    dP_dt_analytic: float
    mass_eta: float
    mass_u: float
    E_loc: Optional[float] = None
    F2: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def diagnostics_row(
    state: FieldPair,
    t: float,
    params: AbcdParams,
    spec: BottomSpec,
    frame_offset: float = 0.0,
    psi: Optional[np.ndarray] = None,
    reference: Optional[Tuple["SolitonProfile", float, float]] = None,
) -> DiagnosticsRow:
    """
    One table row; reference = (profile, rho, rho2) with rho in lab
    coordinates also fills F2.
    """
    g = state.grid
    F2 = None
    if reference is not None:
        profile, rho, rho2 = reference
        F2 = modulated_F2(state, profile, rho, rho2, params, spec, t, frame_offset)
    return DiagnosticsRow(
        t=t,
        H=energy_H(state, params),
        H_h=energy_Hh(state, params, spec, t, frame_offset),
        P=momentum_P(state),
        dHh_dt_analytic=dHh_dt_rhs(state, params, spec, t, frame_offset),
        dP_dt_analytic=dP_dt_rhs(state, params, spec, t, frame_offset),
        mass_eta=integrate(state.eta, g),
        mass_u=integrate(state.u, g),
        E_loc=None if psi is None else local_energy(state, psi, params, spec, t, frame_offset),
        F2=F2,
    )
