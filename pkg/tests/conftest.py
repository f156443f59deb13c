import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_segment_channels(rng: np.random.Generator, min_len=2, max_len=120, scale=5.0):
    """12 random channel sequences with independent lengths."""
    return tuple(
        rng.uniform(-scale, scale, size=int(rng.integers(min_len, max_len + 1)))
        for _ in range(12)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
