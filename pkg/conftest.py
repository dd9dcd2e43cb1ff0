# Pytest Configuration
import os
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

# Quiet JSON logs during tests unless asked otherwise
os.environ.setdefault("WAVELAB_LOG_LEVEL", "WARNING")
os.environ.setdefault("WAVELAB_TRACING", "none")

import pytest

from wavelab.core.model import AbcdParams, BottomSpec
from wavelab.core.spectral import GridSpec
from wavelab.waves import linop
from wavelab.waves.solitary import chen_profile


# Configure pytest
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "slow: Slow tests")


@pytest.fixture(scope="session")
def grid():
    """Standard window L=60 with n=1024."""
    return GridSpec(1024, 60.0)


@pytest.fixture(scope="session")
def small_grid():
    """Window used for dense operator tests (L=60, n=512)."""
    return GridSpec(512, 60.0)


@pytest.fixture(scope="session")
def chen_params():
    return AbcdParams()


@pytest.fixture(scope="session")
def stable_chen(small_grid, chen_params):
    """Chen wave alpha=-1 (omega = 1/sqrt(6)), inside the stability window."""
    return chen_profile(-1.0, "plus", small_grid, chen_params)


@pytest.fixture(scope="session")
def stable_operator(stable_chen):
    """Dense L at the alpha=-1 Chen wave."""
    return linop.assemble_L(stable_chen)


@pytest.fixture(scope="session")
def flat_bottom():
    return BottomSpec(kind="zero")


@pytest.fixture(scope="session")
def gaussian_bottom():
    return BottomSpec(epsilon=0.1)
