"""
Scenario runs and epsilon-scaling fits.
"""

from .scaling import SweepReport, fit_scaling

__all__ = ["SweepReport", "fit_scaling"]
