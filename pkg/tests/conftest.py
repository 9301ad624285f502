import numpy as np
import pytest

from posekit import CameraIntrinsics, default_topology


@pytest.fixture(scope="session")
def topo():
    return default_topology()


@pytest.fixture(scope="session")
def cam():
    return CameraIntrinsics()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_angles(rng, count, bones, lo=-np.pi, hi=np.pi):
    return rng.uniform(lo, hi, (count, bones, 3))


def random_lengths(rng, bones, lo=50.0, hi=600.0):
    return rng.uniform(lo, hi, bones)
