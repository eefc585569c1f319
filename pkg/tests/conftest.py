import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dense_psi(state):
    """Reference state vector built one configuration at a time."""
    from snns.nqs import all_configurations, global_amplitude

    return np.array([global_amplitude(state, s) for s in all_configurations(state.n_visible)])
