import math

import pytest

from privsample import PrivacyParams, SamplingScheme


@pytest.fixture(scope="session")
def params_std():
    return PrivacyParams(0.1, 0.01)


@pytest.fixture(scope="session")
def params_tight():
    return PrivacyParams(0.01, 1e-6)


@pytest.fixture(scope="session")
def params_integral_l():
    # (1 + 2 delta) / (delta (e^eps + 1)) = 16 = 2^4, so the growth phase
    # has exactly 4 steps
    return PrivacyParams(math.log(2.0), 1.0 / 46.0)


@pytest.fixture(scope="session")
def scheme_none():
    return SamplingScheme.none()
