import numpy as np
import pytest

from manifold_mean.ambient import AmbientSpace
from manifold_mean.shapes import Circle, FourierCircle, LatitudeCurve, Torus
from manifold_mean.submanifold import ParametricSubmanifold

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def plane():
    return AmbientSpace.euclidean(2)


@pytest.fixture(scope="session")
def space3():
    return AmbientSpace.euclidean(3)


@pytest.fixture(scope="session")
def s2():
    return AmbientSpace.sphere(2)


@pytest.fixture(scope="session")
def unit_circle(plane):
    return ParametricSubmanifold(plane, Circle(1.0), 64, "unit")


@pytest.fixture(scope="session")
def circle_11(plane):
    return ParametricSubmanifold(plane, Circle(1.1), 64, "outer")


@pytest.fixture(scope="session")
def torus(space3):
    return ParametricSubmanifold(space3, Torus(2.0, 1.0), (32, 24), "torus")


@pytest.fixture(scope="session")
def great_circle(s2):
    return ParametricSubmanifold(s2, LatitudeCurve(0.0), 64, "equator")


@pytest.fixture(scope="session")
def small_circle(s2):
    return ParametricSubmanifold(s2, LatitudeCurve(0.3), 64, "latitude")


@pytest.fixture(scope="session")
def wobbly_pair(plane):
    a = ParametricSubmanifold(plane, FourierCircle(1.0, ((3, 0.01, 0.1),)), 64, "a")
    b = ParametricSubmanifold(plane, FourierCircle(1.08, ((2, 0.015, 0.4),)), 64, "b")
    return a, b
