import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("kypkit", max_examples=30, deadline=None)
settings.load_profile("kypkit")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
