"""
Environment configuration for wavelab runs.
"""

import os
from typing import Dict, Any

from dotenv import load_dotenv

load_dotenv()

TRACING_MODES = ("none", "console")
LOG_FORMATS = ("json", "plain")


class Config:
    """Process-wide settings read from the environment (and .env when present)."""

    def __init__(self):
        # Worker pool
        self.THREADS = int(os.getenv("WAVELAB_THREADS", str(min(4, os.cpu_count() or 1))))

        # Logging
        self.LOG_LEVEL = os.getenv("WAVELAB_LOG_LEVEL", "INFO").upper()
        self.LOG_FORMAT = os.getenv("WAVELAB_LOG_FORMAT", "json").lower()

        # Outputs
        self.OUTPUT_DIR = os.getenv("WAVELAB_OUTPUT_DIR", "./wavelab-out")

        # Dense linear algebra cap (grid points per field)
        self.MAX_DENSE_N = int(os.getenv("WAVELAB_MAX_DENSE_N", "2048"))

        # Tracing
        self.TRACING = os.getenv("WAVELAB_TRACING", "none").lower()

    def validate(self) -> Dict[str, Any]:
        """
        Validate configuration and return status.

        Returns:
            Dict with validation results
        """
        issues = []

        if self.THREADS < 1:
            issues.append("WAVELAB_THREADS must be at least 1")

        if self.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            issues.append(f"WAVELAB_LOG_LEVEL '{self.LOG_LEVEL}' is not a logging level")

        if self.LOG_FORMAT not in LOG_FORMATS:
            issues.append(f"WAVELAB_LOG_FORMAT must be one of {LOG_FORMATS}")

        if self.MAX_DENSE_N < 16:
            issues.append("WAVELAB_MAX_DENSE_N must be at least 16")

        if self.TRACING not in TRACING_MODES:
            issues.append(f"WAVELAB_TRACING must be one of {TRACING_MODES}")

        return {
            "valid": len(issues) == 0,
            "issues": issues,
            "config": self.to_dict(),
        }

    def to_dict(self) -> Dict[str, Any]:
        """Export configuration as dictionary."""
        return {
            "threads": self.THREADS,
            "log_level": self.LOG_LEVEL,
            "log_format": self.LOG_FORMAT,
            "output_dir": self.OUTPUT_DIR,
            "max_dense_n": self.MAX_DENSE_N,
            "tracing": self.TRACING,
        }


# Global configuration instance
config = Config()
