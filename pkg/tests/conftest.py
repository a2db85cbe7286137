import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from triplecoinc.tag_sim import DetectionStream

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


def stream(channel, times, duration=None):
    t = np.sort(np.asarray(times, dtype=np.int64))
    if duration is None:
        duration = int(t.max()) + 1 if t.size else 1
    return DetectionStream(channel, t, duration)


def poisson_times(rng, rate_per_s, seconds):
    duration = int(round(seconds * 1e12))
    n = rng.poisson(rate_per_s * seconds)
    return np.unique(rng.integers(0, duration, size=n, dtype=np.int64)), duration


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
