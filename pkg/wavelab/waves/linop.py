"""
Linearized operator at a solitary wave.

L acts on pairs (eta, u) and is the Hessian of H - omega P at the profile:

    L = [[ c d^2 + 1,                 -omega (1 - d^2) + Q ],
         [ -omega (1 - d^2) + Q,      a d^2 + 1 + R        ]]

It is assembled densely (2n x 2n, eta block first). The translation mode
(R', Q') spans its kernel, so inversion is done on the orthogonal complement
through a bordered system.
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING, List, Optional

import numpy as np
from scipy import linalg

from wavelab.config import config
from wavelab.core.model import AbcdParams, sonic_speed
from wavelab.core.spectral import (
    FieldPair,
    GridSpec,
    deriv,
    deriv_bounded,
    helmholtz,
    inner,
    sobolev_norm,
)
from wavelab.errors import GridError, ParameterError, SolvabilityError
from wavelab.logging_config import get_logger

if TYPE_CHECKING:
    from wavelab.waves.solitary import SolitonProfile

logger = get_logger(__name__)

NEGATIVE_EIGEN_TOL = 1e-7
ORTHOGONALITY_TOL = 1e-8
PIVOT_TOL = 1e-13


@lru_cache(maxsize=8)
def second_derivative_matrix(grid: GridSpec) -> np.ndarray:
    """Dense circulant matrix of the spectral second derivative (symmetric)."""
    column = np.real(np.fft.ifft(-grid.k_full ** 2))
    d2 = linalg.circulant(column)
    return 0.5 * (d2 + d2.T)


def assemble_matrix(
    R: np.ndarray,
    Q: np.ndarray,
    omega: float,
    params: AbcdParams,
    grid: GridSpec,
) -> np.ndarray:
    """Dense L at the pair (R, Q); R = Q = 0 gives the flat operator L0."""
    n = grid.n
    if n > config.MAX_DENSE_N:
        raise GridError(
            f"dense operator limited to n <= {config.MAX_DENSE_N} (WAVELAB_MAX_DENSE_N), got n={n}"
        )
    d2 = second_derivative_matrix(grid)
    eye = np.eye(n)
    coupling = -omega * (eye - d2) + np.diag(Q)
    return np.block([
        [params.c * d2 + eye, coupling],
        [coupling, params.a * d2 + eye + np.diag(R)],
    ])


@dataclass(frozen=True)
class SpectrumSummary:
    """Low-lying spectrum of L."""
    lowest_eigenvalues: List[float]
    negative_count: int
    mu0: Optional[float]
    kernel_residual: float

    def to_dict(self):
        return {
            "lowest_eigenvalues": list(self.lowest_eigenvalues),
            "negative_count": self.negative_count,
            "mu0": self.mu0,
            "kernel_residual": self.kernel_residual,
        }


@dataclass(frozen=True, eq=False)
class OperatorHandle:
    """Assembled L at a profile; the profile may be None for the flat operator L0."""
    profile: Optional["SolitonProfile"]
    params: AbcdParams
    omega: float
    matrix: np.ndarray = field(repr=False)
    grid: GridSpec = field(repr=False)

    @cached_property
    def R(self) -> np.ndarray:
        return self.profile.R if self.profile is not None else np.zeros(self.grid.n)

    @cached_property
    def Q(self) -> np.ndarray:
        return self.profile.Q if self.profile is not None else np.zeros(self.grid.n)

    @cached_property
    def kernel(self) -> FieldPair:
        """Translation mode (R', Q')."""
        return FieldPair(deriv(self.R, self.grid), deriv(self.Q, self.grid), self.grid)

    @cached_property
    def momentum_direction(self) -> FieldPair:
        """J (1 - d^2) Q_omega = ((1 - d^2) Q, (1 - d^2) R)."""
        return FieldPair(helmholtz(self.Q, self.grid), helmholtz(self.R, self.grid), self.grid)

    @cached_property
    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    @cached_property
    def _bordered_lu(self):
        q = self.kernel.stack()
        size = self.matrix.shape[0]
        bordered = np.zeros((size + 1, size + 1))
        bordered[:size, :size] = self.matrix
        bordered[:size, size] = q
        bordered[size, :size] = q
        lu, piv = linalg.lu_factor(bordered, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if not np.all(np.isfinite(pivots)) or pivots.min() < PIVOT_TOL * pivots.max():
            raise SolvabilityError(
                f"bordered system is near-singular at omega={self.omega}"
            )
        return lu, piv


def assemble_L(profile: "SolitonProfile", params: Optional[AbcdParams] = None) -> OperatorHandle:
    """Dense symmetric L at a solitary wave."""
    params = params or profile.params
    if profile.residual > 1e-6:
        logger.warning(
            "assembling L at a profile with large residual",
            omega=profile.omega,
            residual=profile.residual,
        )
    matrix = assemble_matrix(profile.R, profile.Q, profile.omega, params, profile.grid)
    return OperatorHandle(profile, params, profile.omega, matrix, profile.grid)


def assemble_L0(omega: float, params: AbcdParams, grid: GridSpec) -> OperatorHandle:
    """Flat operator L0 (R = Q = 0)."""
    zeros = np.zeros(grid.n)
    return OperatorHandle(None, params, omega, assemble_matrix(zeros, zeros, omega, params, grid), grid)


def apply_L(op: OperatorHandle, pair: FieldPair, bounded: bool = False) -> FieldPair:
    """
    L applied to a pair.

    With bounded=True the derivatives go through deriv_bounded, so pairs that
    tend to different constants at the two edges are handled.
    """
    if not bounded:
        return FieldPair.from_vector(op.matrix @ pair.stack(), op.grid)
    grid, p = op.grid, op.params
    e2 = deriv_bounded(pair.eta, grid, 2)
    u2 = deriv_bounded(pair.u, grid, 2)
    first = p.c * e2 + pair.eta - op.omega * (pair.u - u2) + op.Q * pair.u
    second = -op.omega * (pair.eta - e2) + op.Q * pair.eta + p.a * u2 + pair.u + op.R * pair.u
    return FieldPair(first, second, grid)


def kernel_residual(op: OperatorHandle) -> float:
    """||L Q'|| / ||Q'||_{H^2}."""
    q = op.kernel
    scale = sobolev_norm(q, 2)
    if scale == 0.0:
        return 0.0
    lq = apply_L(op, q)
    return float(np.sqrt(inner(lq, lq)) / scale)


def lowest_spectrum(op: OperatorHandle, count: int = 6) -> SpectrumSummary:
    """Smallest `count` eigenvalues of L in the discrete L^2 pairing."""
    count = max(1, min(count, op.matrix.shape[0]))
    try:
        values = linalg.eigh(op.matrix, eigvals_only=True, subset_by_index=[0, count - 1])
    except linalg.LinAlgError as e:
        logger.error("eigensolver failed", error=e, omega=op.omega)
        raise
    negatives = values[values < -NEGATIVE_EIGEN_TOL]
    return SpectrumSummary(
        lowest_eigenvalues=[float(v) for v in values],
        negative_count=int(negatives.size),
        mu0=float(-negatives[0]) if negatives.size == 1 else None,
        kernel_residual=kernel_residual(op),
    )


def _project_out_kernel(op: OperatorHandle, pair: FieldPair) -> FieldPair:
    q = op.kernel
    qq = inner(q, q)
    if qq == 0.0:
        return pair
    return pair - (inner(pair, q) / qq) * q


def constrained_solve(
    op: OperatorHandle,
    rhs: FieldPair,
    orth_tol: float = ORTHOGONALITY_TOL,
) -> FieldPair:
    """
    Unique solution of L x = rhs with <x, Q'> = 0.

    Raises:
        SolvabilityError: rhs is not orthogonal to the kernel, or the
            bordered system is near-singular
    """
    q = op.kernel
    rhs_norm = np.sqrt(inner(rhs, rhs))
    if rhs_norm == 0.0:
        return FieldPair.zeros(op.grid)
    q_norm = np.sqrt(inner(q, q))
    if q_norm > 0.0:
        defect = abs(inner(rhs, q)) / (rhs_norm * q_norm)
        if defect > orth_tol:
            raise SolvabilityError(
                f"right-hand side is not orthogonal to the kernel (defect {defect:.3e} > {orth_tol:.1e})"
            )
        lu, piv = op._bordered_lu
        solution = linalg.lu_solve((lu, piv), np.append(rhs.stack(), 0.0), check_finite=False)
        out = FieldPair.from_vector(solution[:-1], op.grid)
    else:
        out = FieldPair.from_vector(linalg.solve(op.matrix, rhs.stack(), assume_a="sym"), op.grid)
    return _project_out_kernel(op, out)


def far_field_inverse(op: OperatorHandle, pair: FieldPair) -> FieldPair:
    """M(omega) pair, with M the inverse of the zeroth-order block [[1, -w], [-w, 1]]."""
    w = op.omega
    scale = 1.0 / (1.0 - w * w)
    return FieldPair(scale * (pair.eta + w * pair.u), scale * (w * pair.eta + pair.u), op.grid)


def bounded_rhs_solve(
    op: OperatorHandle,
    rhs: FieldPair,
    orth_tol: float = ORTHOGONALITY_TOL,
) -> FieldPair:
    """
    Solve L x = rhs for a bounded, non-decaying rhs with decaying derivatives.

    The far-field part M(omega) rhs is explicit; the remainder
    -(L - M^-1) M rhs decays and goes through constrained_solve.
    """
    if abs(op.omega) >= 1.0:
        raise ParameterError(f"far-field block is singular for |omega| >= 1, got {op.omega}")
    base = far_field_inverse(op, rhs)
    grid, p, w = op.grid, op.params, op.omega
    e2 = deriv_bounded(base.eta, grid, 2)
    u2 = deriv_bounded(base.u, grid, 2)
    correction = FieldPair(
        -(p.c * e2 + w * u2 + op.Q * base.u),
        -(w * e2 + op.Q * base.eta + p.a * u2 + op.R * base.u),
        grid,
    )
    q = op.kernel
    corr_norm = np.sqrt(inner(correction, correction))
    q_norm = np.sqrt(inner(q, q))
    if corr_norm > 0.0 and q_norm > 0.0:
        defect = abs(inner(correction, q)) / (corr_norm * q_norm)
        if defect > orth_tol:
            logger.warning(
                "bounded right-hand side has a kernel component; projecting",
                defect=defect,
                omega=w,
            )
        correction = _project_out_kernel(op, correction)
    return base + constrained_solve(op, correction, orth_tol=max(orth_tol, 1e-6))


def vk_functional(op: OperatorHandle, profile: Optional["SolitonProfile"] = None) -> float:
    """<J(1-d^2)Q, L^-1 J(1-d^2)Q>; equals dP/domega and is negative for stable waves."""
    if profile is None or profile is op.profile:
        v = op.momentum_direction
    else:
        v = FieldPair(helmholtz(profile.Q, op.grid), helmholtz(profile.R, op.grid), op.grid)
    return inner(v, constrained_solve(op, v))


def _constraint_rows(op: OperatorHandle, constraints: int) -> List[np.ndarray]:
    rows = []
    if constraints >= 1:
        rows.append(op.kernel.stack())
    if constraints >= 2:
        rows.append(op.momentum_direction.stack())
    return [r for r in rows if np.any(r)]


def coercivity_check(op: OperatorHandle, norm: str = "h1", constraints: int = 2) -> float:
    """
    Smallest Rayleigh quotient <L x, x> / ||x||^2 over x orthogonal to the
    first `constraints` of {Q', J(1-d^2)Q}.

    Args:
        op: assembled operator
        norm: "h1" (H^1 x H^1 denominator) or "l2"
        constraints: 0, 1 or 2
    """
    if norm not in ("h1", "l2"):
        raise ValueError(f"norm must be 'h1' or 'l2', got '{norm}'")
    size = op.matrix.shape[0]
    if norm == "h1":
        d2 = second_derivative_matrix(op.grid)
        block = np.eye(op.grid.n) - d2
        gram = linalg.block_diag(block, block)
    else:
        gram = np.eye(size)

    rows = _constraint_rows(op, constraints)
    if rows:
        basis = linalg.null_space(np.vstack(rows))
        a = basis.T @ op.matrix @ basis
        m = basis.T @ gram @ basis
    else:
        a, m = op.matrix, gram
    a = 0.5 * (a + a.T)
    m = 0.5 * (m + m.T)
    value = linalg.eigh(a, m, eigvals_only=True, subset_by_index=[0, 0])
    return float(value[0])


@dataclass
class StabilityReport:
    """Spectral hypotheses at one profile."""
    omega: float
    symmetry_defect: float
    kernel_residual: float
    negative_count: int
    mu0: Optional[float]
    lowest_eigenvalues: List[float]
    vk: float
    c0_h1: float
    c0_l2: float
    c0_single_constraint: float

    @property
    def stable(self) -> bool:
        return self.negative_count == 1 and self.vk < 0 and self.c0_h1 > 0 and self.c0_l2 > 0

    def to_dict(self):
        return {
            "omega": self.omega,
            "symmetry_defect": self.symmetry_defect,
            "kernel_residual": self.kernel_residual,
            "negative_count": self.negative_count,
            "mu0": self.mu0,
            "lowest_eigenvalues": self.lowest_eigenvalues,
            "vk": self.vk,
            "c0_h1": self.c0_h1,
            "c0_l2": self.c0_l2,
            "c0_single_constraint": self.c0_single_constraint,
            "stable": self.stable,
        }


def coercivity_report(op: OperatorHandle):
    """Constrained minima in both norms plus the single-constraint minimum."""
    return {
        "c0_h1": coercivity_check(op, "h1", 2),
        "c0_l2": coercivity_check(op, "l2", 2),
        "c0_single_constraint": coercivity_check(op, "h1", 1),
    }


def stability_report(op: OperatorHandle, count: int = 4) -> StabilityReport:
    """Kernel, negative direction, VK sign and coercivity in one record."""
    spectrum = lowest_spectrum(op, count)
    coercivity = coercivity_report(op)
    report = StabilityReport(
        omega=op.omega,
        symmetry_defect=op.symmetry_defect,
        kernel_residual=spectrum.kernel_residual,
        negative_count=spectrum.negative_count,
        mu0=spectrum.mu0,
        lowest_eigenvalues=spectrum.lowest_eigenvalues,
        vk=vk_functional(op),
        **coercivity,
    )
    logger.info("stability report", **report.to_dict())
    return report


def check_subsonic(omega: float, params: AbcdParams):
    """Reject speeds outside (0, omega*)."""
    limit = sonic_speed(params)
    if not 0.0 < omega < limit:
        raise ParameterError(f"speed {omega} outside the subsonic interval (0, {limit})")
