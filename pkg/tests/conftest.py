import numpy as np
import pytest

from dnekit import bundled_case, preset_ambiguity
from dnekit.builder import SolveConfig, solve_drco


@pytest.fixture(scope="session")
def case2():
    return bundled_case("case2toy")


@pytest.fixture(scope="session")
def case14():
    return bundled_case("case14dne")


@pytest.fixture(scope="session")
def ambiguity2(case2):
    return preset_ambiguity([r.w_max for r in case2.renewables], case2.periods)


@pytest.fixture(scope="session")
def ambiguity14(case14):
    return preset_ambiguity([r.w_max for r in case14.renewables], case14.periods)


@pytest.fixture(scope="session")
def solved2(case2, ambiguity2):
    """A solved strategy on the 2-bus toy, shared across read-only tests."""
    return solve_drco(case2, ambiguity2, SolveConfig(utilization_weight=500.0))


def total_load(case):
    return np.asarray(case.load_matrix).sum(axis=0)
