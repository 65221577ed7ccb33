import numpy as np
import pytest

from wavelet import get_filter


@pytest.fixture(scope='session')
def db8():
    return get_filter('daubechies', 8)


@pytest.fixture(scope='session')
def haar():
    return get_filter('haar')


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
