import pytest

from clockFinder.clock_finder import find_all_cts
from spinCore.operators import build_operators
from spinCore.spin_system import load_system


@pytest.fixture(scope="session")
def si_bi():
    return load_system("Si:Bi")


@pytest.fixture(scope="session")
def si_bi_ops(si_bi):
    return build_operators(si_bi)


@pytest.fixture(scope="session")
def esr_cts(si_bi, si_bi_ops):
    """Merged dfdB clock transitions below 0.25 T, shared by the slower tests."""
    return find_all_cts(si_bi, (0.005, 0.25), ops=si_bi_ops)


@pytest.fixture(scope="session")
def ct_80mT(esr_cts):
    return min(esr_cts, key=lambda ct: abs(ct.B_star - 0.0798))
