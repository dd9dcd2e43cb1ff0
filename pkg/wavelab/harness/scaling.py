"""
Log-log exponent fits for epsilon sweeps.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from wavelab.errors import ParameterError

MIN_POINTS = 3


@dataclass
class SweepReport:
    """Measured values per epsilon and the fitted exponent of value ~ C eps^p."""
    values: Dict[float, float]
    exponent: float
    prefactor: float
    residual: float
    window: Optional[Tuple[float, float]] = None
    label: str = ""
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.window is None:
            return True
        lo, hi = self.window
        return lo <= self.exponent <= hi

    def to_dict(self):
        return {
            "label": self.label,
            "values": {repr(eps): value for eps, value in sorted(self.values.items(), reverse=True)},
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "residual": self.residual,
            "window": list(self.window) if self.window is not None else None,
            "passed": self.passed,
            **self.extras,
        }


def fit_scaling(
    values_by_eps: Dict[float, float],
    window: Optional[Tuple[float, float]] = None,
    label: str = "",
) -> SweepReport:
    """
    Least-squares slope of log(value) against log(eps).

    Raises:
        ParameterError: fewer than three points, or a non-positive eps or value
    """
    if len(values_by_eps) < MIN_POINTS:
        raise ParameterError(f"an exponent fit needs at least {MIN_POINTS} epsilon values, got {len(values_by_eps)}")
    eps = np.array(sorted(values_by_eps), dtype=float)
    vals = np.array([values_by_eps[e] for e in sorted(values_by_eps)], dtype=float)
    if np.any(eps <= 0) or np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise ParameterError("exponent fits need positive finite epsilons and values")

    coeffs, residuals, _, _, _ = np.polyfit(np.log(eps), np.log(vals), 1, full=True)
    slope, intercept = coeffs
    return SweepReport(
        values={float(e): float(v) for e, v in zip(eps, vals)},
        exponent=float(slope),
        prefactor=float(np.exp(intercept)),
        residual=float(residuals[0]) if residuals.size else 0.0,
        window=window,
        label=label,
    )
