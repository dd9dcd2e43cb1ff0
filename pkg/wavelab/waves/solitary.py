"""
Solitary-wave profiles (R, Q) of the abcd system.

A profile moving at speed omega solves

    -omega (1 - d^2) R + a Q'' + Q + R Q = 0
    -omega (1 - d^2) Q + c R'' + R + Q^2 / 2 = 0

For a = c = -1 the explicit sech^2 family is available; otherwise profiles
are computed by a spectral Newton iteration whose Jacobian is the linearized
operator L.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np

from wavelab.core.model import AbcdParams
from wavelab.core.spectral import (
    FieldPair,
    GridSpec,
    deriv,
    helmholtz,
    h1h1_norm,
    integrate,
    reflect,
)
from wavelab.errors import ConvergenceError, ParameterError
from wavelab.logging_config import get_logger
from wavelab.telemetry import trace_operation
from wavelab.waves import linop

logger = get_logger(__name__)

Sign = Union[str, int]

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
COLLAPSE_NORM = 1e-6
OMEGA_STEP = 1e-4


def _sign(sign: Sign) -> int:
    if sign in ("plus", "+", 1):
        return 1
    if sign in ("minus", "-", -1):
        return -1
    raise ParameterError(f"branch sign must be plus or minus, got {sign!r}")


def _branch_name(sign: Sign) -> str:
    return "plus" if _sign(sign) > 0 else "minus"


@dataclass(frozen=True, eq=False)
class SolitonProfile:
    """Sampled solitary wave (R, Q) at speed omega in the co-moving variable."""
    omega: float
    branch: str
    R: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    grid: GridSpec = field(repr=False)
    params: AbcdParams = field(default_factory=AbcdParams)
    alpha: Optional[float] = None
    residual: float = 0.0
    iterations: int = 0

    @property
    def pair(self) -> FieldPair:
        return FieldPair(self.R, self.Q, self.grid)

    @property
    def is_analytic(self) -> bool:
        return self.alpha is not None

    def evenness_defect(self) -> float:
        return float(max(np.max(np.abs(self.R - reflect(self.R))),
                         np.max(np.abs(self.Q - reflect(self.Q)))))

    def edge_magnitude(self) -> float:
        return float(max(abs(self.R[0]), abs(self.Q[0]), abs(self.R[-1]), abs(self.Q[-1])))

    def summary(self):
        return {
            "omega": self.omega,
            "branch": self.branch,
            "alpha": self.alpha,
            "residual": self.residual,
            "iterations": self.iterations,
            "n": self.grid.n,
            "half_length": self.grid.half_length,
        }


# -- Chen family (a = c = -1) -------------------------------------------------

def chen_alpha_to_omega(alpha: float, sign: Sign = "plus") -> float:
    """omega = +-(3 + 2 alpha) / sqrt(3 (3 + alpha))."""
    if alpha <= -3.0 or alpha == 0.0:
        raise ParameterError(f"Chen amplitude must lie in (-3, inf) without 0, got {alpha}")
    return _sign(sign) * (3.0 + 2.0 * alpha) / math.sqrt(3.0 * (3.0 + alpha))


def g_branch(omega: float, sign: Sign = "plus") -> float:
    """Amplitude alpha of the Chen wave with speed omega on the given branch."""
    s = _sign(sign)
    return 0.375 * (omega * omega - 4.0 + s * omega * math.sqrt(omega * omega + 8.0))


def g_branch_prime(omega: float, sign: Sign = "plus") -> float:
    s = _sign(sign)
    root = math.sqrt(omega * omega + 8.0)
    return 0.375 * (2.0 * omega + s * (root + omega * omega / root))


def _chen_q_factor(alpha: float) -> float:
    return math.sqrt(3.0 / (3.0 + alpha))


def chen_profile(
    alpha: float,
    sign: Sign,
    grid: GridSpec,
    params: Optional[AbcdParams] = None,
) -> SolitonProfile:
    """Exact Chen wave R = alpha sech^2(x/2), Q = +-alpha sqrt(3/(3+alpha)) sech^2(x/2)."""
    params = params or AbcdParams()
    if not params.is_chen:
        raise ParameterError(
            f"explicit Chen waves need a = c = -1, got a={params.a}, c={params.c}"
        )
    omega = chen_alpha_to_omega(alpha, sign)
    s = 1.0 / np.cosh(0.5 * grid.x) ** 2
    R = alpha * s
    Q = _sign(sign) * alpha * _chen_q_factor(alpha) * s
    profile = SolitonProfile(omega, _branch_name(sign), R, Q, grid, params, alpha=alpha)
    return replace(profile, residual=profile_residual(profile))


def chen_profile_at(omega: float, sign: Sign, grid: GridSpec) -> SolitonProfile:
    return chen_profile(g_branch(omega, sign), sign, grid)


# -- Profile equations and Newton ---------------------------------------------

def profile_equations(
    R: np.ndarray,
    Q: np.ndarray,
    omega: float,
    params: AbcdParams,
    grid: GridSpec,
) -> Tuple[np.ndarray, np.ndarray]:
    """Left sides (F1, F2) of the profile equations (eta equation first)."""
    f1 = -omega * helmholtz(R, grid) + params.a * deriv(Q, grid, 2) + Q + R * Q
    f2 = -omega * helmholtz(Q, grid) + params.c * deriv(R, grid, 2) + R + 0.5 * Q * Q
    return f1, f2


def profile_residual(profile: SolitonProfile) -> float:
    """Sup-norm residual of both profile equations."""
    f1, f2 = profile_equations(profile.R, profile.Q, profile.omega, profile.params, profile.grid)
    return float(max(np.max(np.abs(f1)), np.max(np.abs(f2))))


def _symmetrize(f: np.ndarray) -> np.ndarray:
    return 0.5 * (f + reflect(f))


def newton_solitary(
    params: AbcdParams,
    omega: float,
    seed: SolitonProfile,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> SolitonProfile:
    """
    Spectral Newton iteration for the profile at speed omega.

    Each step solves L delta = -(F2, F1) on the complement of the translation
    mode, then even-symmetrizes. Steps that increase the residual are halved.

    Raises:
        ParameterError: omega outside (0, omega*)
        ConvergenceError: no convergence, or collapse onto the zero profile
    """
    linop.check_subsonic(omega, params)
    grid = seed.grid
    R = _symmetrize(seed.R)
    Q = _symmetrize(seed.Q)

    def residual_of(r, q):
        f1, f2 = profile_equations(r, q, omega, params, grid)
        return f1, f2, float(max(np.max(np.abs(f1)), np.max(np.abs(f2))))

    f1, f2, res = residual_of(R, Q)
    with trace_operation("newton_solitary", {"omega": omega, "n": grid.n}):
        iteration = 0
        while res >= tol:
            if iteration >= max_iter:
                logger.error(
                    "Newton iteration did not converge",
                    omega=omega,
                    residual=res,
                    iterations=iteration,
                )
                raise ConvergenceError(
                    f"Newton did not converge in {max_iter} iterations (residual {res:.3e})"
                )
            iteration += 1
            current = SolitonProfile(omega, "numeric", R, Q, grid, params)
            op = linop.assemble_L(current, params)
            step = linop.constrained_solve(op, FieldPair(-f2, -f1, grid), orth_tol=1e-6)

            damping = 1.0
            while True:
                R_new = _symmetrize(R + damping * step.eta)
                Q_new = _symmetrize(Q + damping * step.u)
                f1_new, f2_new, res_new = residual_of(R_new, Q_new)
                if res_new <= res or damping < 1e-3:
                    break
                damping *= 0.5

            R, Q, f1, f2, res = R_new, Q_new, f1_new, f2_new, res_new
            logger.debug(
                "Newton step",
                omega=omega,
                iteration=iteration,
                residual=res,
                damping=damping,
            )
            if h1h1_norm(FieldPair(R, Q, grid)) < COLLAPSE_NORM:
                raise ConvergenceError(f"Newton collapsed onto the zero profile at omega={omega}")

    return SolitonProfile(omega, "numeric", R, Q, grid, params, residual=res, iterations=iteration)


def continue_profile(
    params: AbcdParams,
    omega: float,
    grid: GridSpec,
    sign: Sign = "plus",
    steps: int = 4,
    tol: float = NEWTON_TOL,
) -> SolitonProfile:
    """
    Profile at (params, omega), from the Chen wave by continuation in (a, c).

    With a = c = -1 the exact Chen wave is returned.
    """
    chen = chen_profile_at(omega, sign, grid)
    if params.is_chen:
        return replace(chen, params=params)
    profile = chen
    for j in range(1, steps + 1):
        frac = j / steps
        stage = replace(
            params,
            a=-1.0 + frac * (params.a + 1.0),
            c=-1.0 + frac * (params.c + 1.0),
        )
        profile = newton_solitary(stage, omega, replace(profile, params=stage), tol=tol)
    return profile


# -- Energy and momentum -------------------------------------------------------

def profile_momentum(profile: SolitonProfile) -> float:
    """P = int (R Q + R' Q')."""
    return integrate(profile.R * helmholtz(profile.Q, profile.grid), profile.grid)


def profile_energy(profile: SolitonProfile) -> float:
    """E = 1/2 int (-a Q'^2 - c R'^2 + Q^2 + R^2 + Q^2 R)."""
    p, g = profile.params, profile.grid
    dR = deriv(profile.R, g)
    dQ = deriv(profile.Q, g)
    density = -p.a * dQ ** 2 - p.c * dR ** 2 + profile.Q ** 2 + profile.R ** 2 + profile.Q ** 2 * profile.R
    return 0.5 * integrate(density, g)


def momentum_closed_form(omega: float, sign: Sign = "plus") -> float:
    """P = +-16/5 G(omega)^2 (1 + G(omega)/3)^(-1/2) on the Chen branches."""
    alpha = g_branch(omega, sign)
    return _sign(sign) * 3.2 * alpha ** 2 / math.sqrt(1.0 + alpha / 3.0)


def energy_closed_form(omega: float, sign: Sign = "plus") -> float:
    """E = 18/5 (1 + omega^2 (G(omega) - 1)) on the Chen branches."""
    return 3.6 * (1.0 + omega * omega * (g_branch(omega, sign) - 1.0))


def momentum_slope_closed_form(omega: float, sign: Sign = "plus") -> float:
    """dP/domega of the Chen branches (chain rule through dalpha/domega)."""
    alpha = g_branch(omega, sign)
    base = 1.0 + alpha / 3.0
    dp_dalpha = 3.2 * (2.0 * alpha * base ** -0.5 - (alpha ** 2 / 6.0) * base ** -1.5)
    return _sign(sign) * dp_dalpha * g_branch_prime(omega, sign)


def _profile_at(
    params: AbcdParams,
    omega: float,
    sign: Sign,
    grid: GridSpec,
    seed: Optional[SolitonProfile],
) -> SolitonProfile:
    if seed is None:
        return continue_profile(params, omega, grid, sign)
    if params.is_chen and seed.is_analytic:
        return chen_profile(g_branch(omega, seed.branch), seed.branch, seed.grid, params)
    return newton_solitary(params, omega, seed)


def slope_dP_domega(
    params: AbcdParams,
    omega: float,
    sign: Sign = "plus",
    seed: Optional[SolitonProfile] = None,
    grid: Optional[GridSpec] = None,
    delta: float = 1e-3,
) -> float:
    """
    Centered difference of the quadrature momentum over profiles at omega +- delta.

    Raises:
        ConvergenceError: Newton fails at a shifted speed
    """
    grid = grid or (seed.grid if seed is not None else GridSpec(1024, 60.0))
    plus = _profile_at(params, omega + delta, sign, grid, seed)
    minus = _profile_at(params, omega - delta, sign, grid, seed)
    return (profile_momentum(plus) - profile_momentum(minus)) / (2.0 * delta)


def profile_omega_derivative(profile: SolitonProfile, delta: float = OMEGA_STEP) -> FieldPair:
    """
    Lambda Q = d(R, Q)/domega.

    Analytic for Chen waves; centered differences of Newton profiles otherwise.
    """
    grid = profile.grid
    if profile.is_analytic and profile.params.is_chen:
        alpha = profile.alpha
        s = 1.0 / np.cosh(0.5 * grid.x) ** 2
        dalpha = g_branch_prime(profile.omega, profile.branch)
        dq_dalpha = math.sqrt(3.0) * (3.0 + alpha) ** -1.5 * (3.0 + 0.5 * alpha)
        return FieldPair(dalpha * s, _sign(profile.branch) * dq_dalpha * dalpha * s, grid)

    plus = newton_solitary(profile.params, profile.omega + delta, profile)
    minus = newton_solitary(profile.params, profile.omega - delta, profile)
    return FieldPair(
        (plus.R - minus.R) / (2.0 * delta),
        (plus.Q - minus.Q) / (2.0 * delta),
        grid,
    )
