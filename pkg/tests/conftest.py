import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mosquito_evo import algebra as al
from mosquito_evo import dynamics as dyn

settings.register_profile(
    "default", max_examples=60, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def A0():
    return al.structure_matrix(dyn.BASELINE, 0.0)


@pytest.fixture(scope="session")
def interior_point():
    fps = [f for f in dyn.fixed_points_newton(dyn.BASELINE) if f.point[1] > 1]
    return fps[0].point


@pytest.fixture(scope="session")
def det_zero_params():
    base = dyn.BASELINE.replace(e_hat=0.65)
    return al.with_b(base, al.singular_b(base))
