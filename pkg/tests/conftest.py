import numpy as np
import pytest

from opmm import Box, OnlineProblem, ScalarTheta
from opmm.streams import LinearDriftStream, linear_constraints


@pytest.fixture
def box2():
    return Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])


@pytest.fixture
def conv2d_problem(box2):
    """Convex 2-d instance with two linear constraints and a drifting loss."""
    cons = linear_constraints([[1.0, 1.0], [-1.0, 0.5]], [0.8, 0.9], box2,
                              slater_point=[0.0, 0.0])
    stream = LinearDriftStream(n=2, seed=7, c_scale=1.0, bias=(-1.0, -1.0))
    return OnlineProblem(set_=box2, cons=cons, stream=stream, x1=np.zeros(2))
