import numpy as np
import pytest

from hawkesgreeks.asset import ModelParams
from hawkesgreeks.hawkes import HawkesParams


@pytest.fixture
def model():
    return ModelParams()


@pytest.fixture
def params():
    return HawkesParams()


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return x.mean(), x.std(ddof=1) / np.sqrt(x.size)


def within(x, target, k=3.0):
    """True when the sample mean of x is within k standard errors of target."""
    m, se = mean_se(x)
    return abs(m - target) <= k * se
