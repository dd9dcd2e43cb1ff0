"""
Model constants of the abcd system and the slowly varying bottom.

After rescaling b = d = 1; (a, c) set the dispersion, (a1, c1) couple the
equations to the bottom motion. The bottom is h(t, x) = eps * h0(eps t, eps x)
with h0 given in closed form together with its (s, y) derivatives.
"""

import math
from dataclasses import dataclass, asdict
from typing import Union

import numpy as np
from numpy.polynomial import hermite
from scipy import special

from wavelab.errors import ParameterError

ArrayLike = Union[float, np.ndarray]

BOTTOM_KINDS = ("gaussian", "sech2-product", "zero")
MAX_DS = 2
MAX_DY = 3
EPSILON_RANGE = (1e-3, 0.5)
T_EPSILON_CAP = 2000.0


@dataclass(frozen=True)
class AbcdParams:
    """Dispersion constants (a, b, c, d) and bottom couplings (a1, c1)."""
    a: float = -1.0
    c: float = -1.0
    b: float = 1.0
    d: float = 1.0
    a1: float = 1.0 / 3.0
    c1: float = 1.0

    @property
    def hamiltonian(self) -> bool:
        """Generic Hamiltonian regime b = d > 0, a < 0, c < 0."""
        return self.b == self.d and self.b > 0 and self.a < 0 and self.c < 0

    @property
    def is_chen(self) -> bool:
        return self.a == -1.0 and self.c == -1.0

    def to_dict(self):
        return asdict(self)


def params_from_theta(theta: float, lam: float, mu: float) -> AbcdParams:
    """
    Physical constants from the depth parameter theta and the free splits (lambda, mu).

    The returned (a, b, c, d) are not rescaled, so b and d may vanish; the sum
    a + b + c + d is 1/3 for every input.
    """
    if not 0.0 <= theta <= 1.0:
        raise ParameterError(f"theta must lie in [0, 1], got {theta}")
    t2 = theta * theta
    return AbcdParams(
        a=0.5 * (t2 - 1.0 / 3.0) * lam,
        b=0.5 * (t2 - 1.0 / 3.0) * (1.0 - lam),
        c=0.5 * (1.0 - t2) * mu,
        d=0.5 * (1.0 - t2) * (1.0 - mu),
        a1=0.5 * ((1.0 - lam) * (t2 - 1.0 / 3.0) + 1.0 - 2.0 * theta),
        c1=1.0 - theta,
    )


def sonic_speed(params: AbcdParams) -> float:
    """Subsonic threshold min(sqrt(ac), 1)."""
    if params.a >= 0 or params.c >= 0:
        raise ParameterError(
            f"sonic speed needs a < 0 and c < 0, got a={params.a}, c={params.c}"
        )
    return min(math.sqrt(params.a * params.c), 1.0)


@dataclass(frozen=True)
class BottomSpec:
    """
    Slow bottom h = epsilon * h0(epsilon t, epsilon x).

    kind "gaussian": h0 = A exp(-(s-s0)^2) exp(-(y-y0)^2)
    kind "sech2-product": h0 = A sech^2(s-s0) sech^2(y-y0)
    kind "zero": flat bottom
    """
    epsilon: float = 0.1
    amplitude: float = 1.0
    kind: str = "gaussian"
    k0: float = 1.0
    l0: float = 1.0
    s0: float = 0.0
    y0: float = 0.0
    delta0: float = 0.1

    def __post_init__(self):
        if self.kind not in BOTTOM_KINDS:
            raise ParameterError(f"unknown bottom kind '{self.kind}', expected one of {BOTTOM_KINDS}")
        lo, hi = EPSILON_RANGE
        if not lo <= self.epsilon <= hi:
            raise ParameterError(f"epsilon must lie in [{lo}, {hi}], got {self.epsilon}")
        if self.delta0 <= 0:
            raise ParameterError("delta0 must be positive")

    @property
    def is_flat(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    def to_dict(self):
        return asdict(self)


def _check_orders(ds: int, dy: int):
    if not (0 <= ds <= MAX_DS and 0 <= dy <= MAX_DY):
        raise ParameterError(
            f"bottom derivative order (ds={ds}, dy={dy}) outside supported range "
            f"(ds <= {MAX_DS}, dy <= {MAX_DY})"
        )


def _gaussian_derivative(x: ArrayLike, order: int) -> ArrayLike:
    # d^m/dx^m exp(-x^2) = (-1)^m H_m(x) exp(-x^2)
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    return (-1) ** order * hermite.hermval(x, coeffs) * np.exp(-np.square(x))


def _sech2_derivative(x: ArrayLike, order: int) -> ArrayLike:
    t = np.tanh(x)
    f = 1.0 - t * t
    if order == 0:
        return f
    if order == 1:
        return -2.0 * t * f
    if order == 2:
        return 4.0 * f - 6.0 * f * f
    return -2.0 * t * f * (4.0 - 12.0 * f)


def bottom_h0(spec: BottomSpec, s: ArrayLike, y: ArrayLike, ds: int = 0, dy: int = 0) -> ArrayLike:
    """Closed-form derivative d_s^ds d_y^dy h0(s, y) in the slow variables."""
    _check_orders(ds, dy)
    if spec.is_flat:
        return np.zeros(np.broadcast(np.asarray(s), np.asarray(y)).shape) + 0.0
    profile = _gaussian_derivative if spec.kind == "gaussian" else _sech2_derivative
    return spec.amplitude * profile(np.asarray(s) - spec.s0, ds) * profile(np.asarray(y) - spec.y0, dy)


def bottom_h0_tail(spec: BottomSpec, s: ArrayLike, y: ArrayLike, ds: int = 0) -> ArrayLike:
    """Closed-form right tail: integral over y' from y to +inf of d_s^ds h0(s, y')."""
    _check_orders(ds, 0)
    if spec.is_flat:
        return np.zeros(np.broadcast(np.asarray(s), np.asarray(y)).shape) + 0.0
    y = np.asarray(y) - spec.y0
    if spec.kind == "gaussian":
        tail = 0.5 * math.sqrt(math.pi) * special.erfc(y)
        return spec.amplitude * _gaussian_derivative(np.asarray(s) - spec.s0, ds) * tail
    return spec.amplitude * _sech2_derivative(np.asarray(s) - spec.s0, ds) * (1.0 - np.tanh(y))


def bottom_eval(spec: BottomSpec, t: float, x: ArrayLike, ds: int = 0, dy: int = 0) -> ArrayLike:
    """
    d_t^ds d_x^dy h(t, x) = eps^(1+ds+dy) (d_s^ds d_y^dy h0)(eps t, eps x).

    Args:
        spec: bottom specification
        t: lab time
        x: lab position (scalar or array)
        ds: time-derivative order (<= 2)
        dy: space-derivative order (<= 3)
    """
    eps = spec.epsilon
    return eps ** (1 + ds + dy) * bottom_h0(spec, eps * t, eps * np.asarray(x), ds, dy)


def t_epsilon(spec: BottomSpec) -> float:
    """Interaction time scale eps^(-1-delta0), capped for desk-scale runs."""
    return min(spec.epsilon ** (-1.0 - spec.delta0), T_EPSILON_CAP)
