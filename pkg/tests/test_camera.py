import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.camera import CameraIntrinsics, make_pairs, project
from posekit.errors import ConfigError, DegenerateProjectionError


def test_default_intrinsics():
    cam = CameraIntrinsics()
    assert cam.fx == cam.fy == 1150.0
    assert cam.cx == cam.cy == 500.0
    assert cam.width == cam.height == 1000


def test_intrinsics_validation():
    with pytest.raises(ConfigError):
        CameraIntrinsics(fx=0.0)
    with pytest.raises(ConfigError):
        CameraIntrinsics(cx=1000.0)  # must sit strictly inside the image
    with pytest.raises(ConfigError):
        CameraIntrinsics(cy=-1.0)


def test_intrinsics_json_round_trip():
    cam = CameraIntrinsics(fx=800.0, fy=820.0, cx=320.0, cy=240.0, width=640, height=480)
    again = CameraIntrinsics.from_json_dict(cam.to_json_dict())
    assert again == cam
    with pytest.raises(ConfigError):
        CameraIntrinsics.from_json_dict({**cam.to_json_dict(), "zoom": 2})


def test_project_optical_axis():
    cam = CameraIntrinsics()
    for z in (1.0, 500.0, 4000.0):
        uv = project(np.array([[0.0, 0.0, z]]), cam)
        assert np.allclose(uv[0], [cam.cx, cam.cy], atol=1e-12)


def test_project_similar_triangles():
    cam = CameraIntrinsics(fx=1000.0, fy=1000.0, cx=500.0, cy=500.0)
    uv = project(np.array([[100.0, 0.0, 1000.0]]), cam)
    assert np.allclose(uv[0], [600.0, 500.0], atol=1e-12)


def test_project_scale_invariance(rng):
    cam = CameraIntrinsics()
    pose = rng.normal(0.0, 200.0, (17, 3))
    pose[:, 2] += 4000.0
    assert np.allclose(project(2.0 * pose, cam), project(pose, cam), atol=1e-9)


def test_project_rejects_non_positive_depth():
    cam = CameraIntrinsics()
    pose = np.array([[0.0, 0.0, 100.0], [0.0, 0.0, -1.0]])
    with pytest.raises(DegenerateProjectionError) as exc:
        project(pose, cam)
    assert exc.value.joint_index == 1


def test_project_batched(rng):
    cam = CameraIntrinsics()
    poses = rng.normal(0.0, 200.0, (6, 17, 3))
    poses[..., 2] += 4000.0
    batch = project(poses, cam)
    assert batch.shape == (6, 17, 2)
    for k in range(6):
        assert np.allclose(batch[k], project(poses[k], cam), atol=1e-12)


def test_make_pairs_roots_zeroed(topo, cam, rng):
    poses = rng.normal(0.0, 200.0, (5, topo.joint_count, 3))
    poses[..., 2] += 4000.0
    p2, p3 = make_pairs(poses, cam, topo)
    assert p2.shape == (5, topo.joint_count, 2)
    assert p3.shape == (5, topo.joint_count, 3)
    assert np.all(p3[:, topo.root_index] == 0.0)


def test_make_pairs_empty(topo, cam):
    p2, p3 = make_pairs(np.zeros((0, topo.joint_count, 3)), cam, topo)
    assert p2.shape == (0, topo.joint_count, 2)
    assert p3.shape == (0, topo.joint_count, 3)


def test_make_pairs_matches_project_oracle(topo, cam, rng):
    poses = rng.normal(0.0, 200.0, (100, topo.joint_count, 3))
    poses[..., 2] += 4000.0
    p2, p3 = make_pairs(poses, cam, topo)
    assert p2.shape[0] == 100
    for k in range(100):
        assert np.allclose(p2[k], project(poses[k], cam), atol=1e-12)
        expect = poses[k] - poses[k, topo.root_index]
        assert np.allclose(p3[k], expect, atol=1e-12)


@settings(max_examples=40)
@given(st.floats(0.1, 50.0), st.integers(0, 2**31 - 1))
def test_projection_scale_invariance_property(scale, seed):
    """Scaling a pose about the camera center is invisible to the image."""
    cam = CameraIntrinsics()
    r = np.random.default_rng(seed)
    pose = r.normal(0.0, 100.0, (4, 3))
    pose[:, 2] = np.abs(pose[:, 2]) + 500.0
    assert np.allclose(project(scale * pose, cam), project(pose, cam), atol=1e-9)
