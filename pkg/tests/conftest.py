import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

settings.register_profile(
    "nair", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("nair")


def random_sparse(rng, m, n, density=0.3):
    A = sp.random(m, n, density=density, random_state=rng, format="csr")
    A.data = A.data * 2 - 1
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
