import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slipstokes.operator_core import build_box_stokes, grid_points

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


def direct_mode(k, a, L, x):
    """Evaluate a_c sin(k_c x_c) prod_{j != c} cos(k_j x_j) at points x of shape (..., d)."""
    k = np.asarray(k, float) * math.pi / L
    d = len(k)
    out = []
    for c in range(d):
        v = a[c] * np.ones(x.shape[:-1])
        for j in range(d):
            v = v * (np.sin(k[j] * x[..., j]) if j == c else np.cos(k[j] * x[..., j]))
        out.append(v)
    return np.array(out)


def mesh(d, M, L=math.pi):
    g = grid_points(M, L)
    return np.stack(np.meshgrid(*([g] * d), indexing="ij"), -1)


@pytest.fixture(scope="session")
def box2():
    return build_box_stokes(2, 4, 12)


@pytest.fixture(scope="session")
def box3():
    return build_box_stokes(3, 3, 10)
