import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fkquasi import landscape, pointset, potential

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fib100():
    return pointset.build_cut_and_project("fibonacci", (0.0, 100.0))


@pytest.fixture(scope="session")
def fib_big():
    return pointset.build_cut_and_project("fibonacci", (-1500.0, 1500.0))


@pytest.fixture(scope="session")
def fib_wells(fib_big):
    return potential.make_bump_potential(fib_big, 1.0, 0.5, -1)


@pytest.fixture(scope="session")
def fib_atlas(fib_wells):
    atlas = landscape.find_critical_points(fib_wells, (-150.0, 150.0))
    return atlas.with_constants(landscape.estimate_constants(fib_wells, atlas))


@pytest.fixture(scope="session")
def cos1():
    return potential.make_periodic_potential("one_minus_cos", 1)


@pytest.fixture(scope="session")
def cos_atlas(cos1):
    atlas = landscape.find_critical_points(cos1, (-540.0, 540.0))
    return atlas.with_constants(landscape.estimate_constants(cos1, atlas))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
