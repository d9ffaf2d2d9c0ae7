import numpy as np
import pytest

from delaywave.iterate import solve_wave
from delaywave.models import BZParams, LVParams, bz_build, lv_build


@pytest.fixture(scope="session")
def bz3():
    return bz_build(BZParams(), 3.0)


@pytest.fixture(scope="session")
def lv3():
    return lv_build(LVParams(), 3.0)


@pytest.fixture(scope="session")
def bz_wave(bz3):
    spec, pair, kp = bz3
    phi, rep = solve_wave(spec, kp, pair, tol=1e-6, max_iter=500)
    return spec, kp, phi, rep


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
