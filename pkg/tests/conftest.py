import math

import numpy as np
import pytest

from singlet_distill import PhysicalParams

PI = math.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def params():
    # n = 1, chi = 2.5 pi, G = pi
    return PhysicalParams()
