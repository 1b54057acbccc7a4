import numpy as np
import pytest

from capbarrier.media import CapillaryPressureCurve, Medium, MobilityCurve


def make_medium(phi, lam, cap, name=None):
    return Medium(phi, MobilityCurve.from_polynomial(lam),
                  CapillaryPressureCurve.from_polynomial(cap), name)


@pytest.fixture
def coarse():
    return make_medium(0.3, [0.0, 4.0, -4.0], [0.0, 1.0], "coarse")


@pytest.fixture
def fine():
    return make_medium(0.25, [0.0, 2.0, -2.0], [0.5, 1.0], "fine")


@pytest.fixture
def tight():
    return make_medium(0.25, [0.0, 2.0, -2.0], [2.0, 1.0], "tight")


@pytest.fixture
def unit():
    return make_medium(1.0, [1.0], [0.0, 1.0], "unit")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
