"""
Periodic-grid spectral calculus.

The real line is replaced by the periodic window [-L, L) sampled at n points.
Derivatives and the Helmholtz inverse (1 - d^2/dx^2)^{-1} act through their
Fourier symbols; odd-order symbols have the Nyquist mode zeroed so that real
fields stay real. The right-anchored antiderivative handles the mean mode
separately because its output is bounded but not periodic.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from wavelab.errors import GridError
from wavelab.logging_config import get_logger

logger = get_logger(__name__)

# Width of the smooth step used to split off far-field limits in deriv_bounded.
STEP_WIDTH = 2.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-L, L) with n points (n a power of two)."""
    n: int
    half_length: float = 60.0

    def __post_init__(self):
        if self.n < 16 or self.n % 2:
            raise GridError(f"grid size must be even and >= 16, got n={self.n}")
        if self.n & (self.n - 1):
            raise GridError(f"grid size must be a power of two, got n={self.n}")
        if not self.half_length > 0:
            raise GridError(f"half_length must be positive, got {self.half_length}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """Nonnegative wavenumbers pi*j/L of the real transform."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers for odd-order symbols (Nyquist mode zeroed)."""
        k = self.k.copy()
        k[-1] = 0.0
        return k

    @cached_property
    def k_full(self) -> np.ndarray:
        """Signed wavenumbers of the complex transform, for dense assembly."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask on the real-transform modes."""
        return self.k <= (2.0 / 3.0) * self.k[-1]

    def to_dict(self):
        return {"n": self.n, "half_length": self.half_length, "dx": self.dx}


@dataclass(frozen=True, eq=False)
class FieldPair:
    """Sampled (eta, u) pair sharing one grid."""
    eta: np.ndarray
    u: np.ndarray
    grid: GridSpec = field(repr=False)

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if eta.shape != (self.grid.n,) or u.shape != (self.grid.n,):
            raise GridError(
                f"field shapes {eta.shape}/{u.shape} do not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "u", u)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FieldPair":
        return cls(np.zeros(grid.n), np.zeros(grid.n), grid)

    @classmethod
    def from_vector(cls, vector: np.ndarray, grid: GridSpec) -> "FieldPair":
        """Split a stacked (eta-block, u-block) vector."""
        return cls(vector[:grid.n], vector[grid.n:], grid)

    def stack(self) -> np.ndarray:
        return np.concatenate([self.eta, self.u])

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "FieldPair":
        return FieldPair(fn(self.eta), fn(self.u), self.grid)

    def swapped(self) -> "FieldPair":
        """J-conjugation: (eta, u) -> (u, eta)."""
        return FieldPair(self.u, self.eta, self.grid)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.eta)) and np.all(np.isfinite(self.u)))

    def _check(self, other: "FieldPair"):
        if other.grid != self.grid:
            raise GridError("field pairs live on different grids")

    def __add__(self, other: "FieldPair") -> "FieldPair":
        self._check(other)
        return FieldPair(self.eta + other.eta, self.u + other.u, self.grid)

    def __sub__(self, other: "FieldPair") -> "FieldPair":
        self._check(other)
        return FieldPair(self.eta - other.eta, self.u - other.u, self.grid)

    def __mul__(self, scalar: float) -> "FieldPair":
        return FieldPair(scalar * self.eta, scalar * self.u, self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "FieldPair":
        return FieldPair(-self.eta, -self.u, self.grid)


def _check_length(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise GridError(f"field of shape {f.shape} does not match grid n={grid.n}")
    return f


def deriv(f: np.ndarray, grid: GridSpec, order: int = 1) -> np.ndarray:
    """Spectral derivative of a periodic field."""
    if order < 1:
        raise ValueError("derivative order must be a positive integer")
    f = _check_length(f, grid)
    k = grid.k_odd if order % 2 else grid.k
    return np.fft.irfft((1j * k) ** order * np.fft.rfft(f), n=grid.n)


def _step(x: np.ndarray, order: int) -> np.ndarray:
    """Smooth step theta = (1 - tanh(x/w))/2 (1 at -L, 0 at +L) and its derivatives."""
    w = STEP_WIDTH
    t = np.tanh(x / w)
    s = 1.0 - t * t
    if order == 0:
        return 0.5 * (1.0 - t)
    if order == 1:
        return -s / (2.0 * w)
    if order == 2:
        return t * s / w ** 2
    if order == 3:
        return (s * s - 2.0 * t * t * s) / w ** 3
    raise ValueError("bounded derivatives are implemented up to order 3")


def deriv_bounded(f: np.ndarray, grid: GridSpec, order: int = 1) -> np.ndarray:
    """
    Derivative of a field that is flat near both edges but with different limits.

    The edge jump is carried by an analytic smooth step; only the periodic
    remainder goes through the FFT.
    """
    f = _check_length(f, grid)
    left, right = f[0], f[-1]
    jump = left - right
    remainder = f - right - jump * _step(grid.x, 0)
    return deriv(remainder, grid, order) + jump * _step(grid.x, order)


def helmholtz_inv(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(1 - d^2/dx^2)^{-1} through the symbol 1/(1+k^2)."""
    f = _check_length(f, grid)
    return np.fft.irfft(np.fft.rfft(f) / (1.0 + grid.k ** 2), n=grid.n)


def helmholtz(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(1 - d^2/dx^2) f."""
    f = _check_length(f, grid)
    return np.fft.irfft(np.fft.rfft(f) * (1.0 + grid.k ** 2), n=grid.n)


def antideriv_from_right(
    f: np.ndarray,
    grid: GridSpec,
    method: str = "spectral",
    edge_tol: float = 1e-8,
) -> np.ndarray:
    """
    F(z) = integral of f from z to the right edge +L.

    -dF/dz = f and F(+L) = 0. The value at the left edge approximates the
    total integral, so the output is bounded but generally not periodic.

    Args:
        f: integrand, expected to decay at the right edge
        grid: grid of f
        method: "spectral" (exact for band-limited f) or "trapezoid"
        edge_tol: right-edge magnitude above which a truncation warning is logged
    """
    f = _check_length(f, grid)
    edge = abs(f[-1])
    if edge > edge_tol:
        logger.warning(
            "antiderivative integrand does not decay at the right edge",
            edge_value=edge,
            threshold=edge_tol,
            half_length=grid.half_length,
        )

    if method == "trapezoid":
        tail = 0.5 * grid.dx * (f[-1] + f[0])
        return cumulative_trapezoid(f[::-1], dx=grid.dx, initial=0.0)[::-1] + tail
    if method != "spectral":
        raise ValueError(f"unknown antiderivative method '{method}'")

    fh = np.fft.rfft(f)
    mean = fh[0].real / grid.n
    k = grid.k_odd
    gh = np.zeros_like(fh)
    nonzero = k != 0.0
    gh[nonzero] = fh[nonzero] / (1j * k[nonzero])
    periodic = np.fft.irfft(gh, n=grid.n)
    # periodic part repeats, so its value at +L equals the sample at -L
    return (periodic[0] - periodic) + mean * (grid.half_length - grid.x)


def shift(f: np.ndarray, grid: GridSpec, delta: float) -> np.ndarray:
    """Return f(x - delta) by phase multiplication."""
    f = _check_length(f, grid)
    return np.fft.irfft(np.fft.rfft(f) * np.exp(-1j * grid.k_odd * delta), n=grid.n)


def shift_pair(p: FieldPair, delta: float) -> FieldPair:
    return p.map(lambda f: shift(f, p.grid, delta))


def reflect(f: np.ndarray) -> np.ndarray:
    """f(-x) on the grid x_j = -L + j dx."""
    return np.roll(np.asarray(f)[::-1], 1)


def integrate(f: np.ndarray, grid: GridSpec) -> float:
    """Periodic trapezoid rule (spectrally accurate for smooth decaying f)."""
    return float(grid.dx * np.sum(f))


def inner(p: FieldPair, q: FieldPair) -> float:
    """L^2 x L^2 pairing of two field pairs."""
    if p.grid != q.grid:
        raise GridError("inner product of pairs on different grids")
    return float(p.grid.dx * (np.dot(p.eta, q.eta) + np.dot(p.u, q.u)))


def interior_mask(grid: GridSpec, margin: float) -> np.ndarray:
    """Boolean mask of points at distance >= margin from both edges."""
    return np.abs(grid.x) <= grid.half_length - margin


def sobolev_norm(p: FieldPair, order: int = 1, margin: float = 0.0) -> float:
    """
    H^s x H^s norm with all derivatives up to `order` weighted equally.

    Derivatives are taken on the whole window; with margin > 0 only the
    interior points enter the quadrature.
    """
    keep = interior_mask(p.grid, margin) if margin > 0 else slice(None)
    total = 0.0
    for j in range(order + 1):
        de = p.eta if j == 0 else deriv(p.eta, p.grid, j)
        du = p.u if j == 0 else deriv(p.u, p.grid, j)
        total += np.sum(de[keep] ** 2) + np.sum(du[keep] ** 2)
    return float(np.sqrt(p.grid.dx * total))


def h1h1_norm(p: FieldPair) -> float:
    """Energy-space norm sqrt(int eta^2 + eta'^2 + u^2 + u'^2)."""
    return sobolev_norm(p, 1)


def l2_norm(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(grid.dx * np.dot(f, f)))
