import pytest
from scipy import integrate

from gengeom.fieldexpr import DeltaNet
from gengeom.levicivita import christoffel
from gengeom.scenarios import get_scenario


def bump_constant() -> float:
    """1 / ∫ exp(-1/(1-s²)) ds, computed independently of the package."""
    from math import exp

    raw, _ = integrate.quad(lambda s: exp(-1.0 / (1.0 - s * s)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return 1.0 / raw


@pytest.fixture(scope="session")
def bump():
    return DeltaNet("bump")


@pytest.fixture(scope="session")
def minkowski():
    return get_scenario("minkowski").build_metric()


@pytest.fixture(scope="session")
def sphere():
    return get_scenario("sphere2").build_metric()


@pytest.fixture(scope="session")
def ppwave():
    return get_scenario("ppwave").build_metric()


@pytest.fixture(scope="session")
def ppwave_gamma(ppwave):
    return christoffel(ppwave)


@pytest.fixture(scope="session")
def sphere_gamma(sphere):
    return christoffel(sphere)
