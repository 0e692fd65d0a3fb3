import math

import numpy as np
import pytest

from trapnets import build_network
from trapnets.networks import FiniteMetricSpace


@pytest.fixture
def unit_path3():
    return build_network([1, 2, 3], [(1, 2, 1.0), (2, 3, 1.0)], root=1)


@pytest.fixture
def unit_triangle():
    return build_network([1, 2, 3], [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)], root=1)


def line_space(coords, root_index=0):
    """Rooted finite metric space with points on the real line."""
    arr = np.asarray(coords, dtype=float)
    dist = np.abs(arr[:, None] - arr[None, :])
    return FiniteMetricSpace(tuple(range(len(arr))), dist, root_index)


def two_state_kernel(c, nu1, nu2, t):
    """Closed-form transition matrix of the two-state chain (scalar ODE)."""
    q12, q21 = c / nu1, c / nu2
    theta = q12 + q21
    pi1 = q21 / theta
    decay = math.exp(-theta * t)
    p11 = pi1 + (1.0 - pi1) * decay
    p21 = pi1 * (1.0 - decay)
    return np.array([[p11, 1.0 - p11], [p21, 1.0 - p21]])
