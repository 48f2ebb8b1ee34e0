import numpy as np
import pytest

from hexcryst.analysis import euler_check
from hexcryst.constants import C6
from hexcryst.geometry import unit_square
from hexcryst.tessellation import DomainSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


@pytest.fixture
def square_domain():
    """Unit-square base at lambda = 2 c6, so V_lambda = 1."""
    return DomainSpec.polygon(unit_square(), 2.0 * C6)


def assert_euler(partition, domain):
    """Every partition produced anywhere in the suite must satisfy the
    average-edge-count bound on <= 6-sided domains."""
    chk = euler_check(partition, domain)
    assert chk.passed, (
        f"Euler audit violated: avg {chk.avg_edges} > bound {chk.bound}")
    return chk
