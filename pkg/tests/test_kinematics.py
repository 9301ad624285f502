import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.errors import DegeneratePoseError
from posekit.kinematics import (
    axis_rotation,
    bone_rotation,
    chain_transform,
    forward_kinematics,
    forward_kinematics_batch,
    inverse_kinematics,
    inverse_kinematics_batch,
    rotation_x,
    rotation_y,
    rotation_z,
)
from posekit.skeleton import SkeletonTopology, bones_of, default_topology

from conftest import random_angles, random_lengths


def assert_rotation(mat, tol=1e-12):
    assert np.allclose(mat @ mat.T, np.eye(3), atol=tol)
    assert abs(np.linalg.det(mat) - 1.0) < tol


def test_axis_rotation_quarter_turn_z():
    out = axis_rotation("z", np.pi / 2) @ np.array([1.0, 0.0, 0.0])
    assert np.allclose(out, [0.0, 1.0, 0.0], atol=1e-12)


def test_axis_rotation_zero_is_identity():
    assert np.allclose(axis_rotation("x", 0.0), np.eye(3), atol=1e-15)


def test_axis_rotation_inverse(rng):
    for theta in rng.uniform(-np.pi, np.pi, 20):
        prod = axis_rotation("y", theta) @ axis_rotation("y", -theta)
        assert np.allclose(prod, np.eye(3), atol=1e-12)


def test_axis_rotation_rejects_non_finite():
    with pytest.raises(ValueError):
        axis_rotation("x", np.nan)
    with pytest.raises(ValueError):
        axis_rotation("q", 0.1)


def test_bone_rotation_zero_triple():
    assert np.allclose(bone_rotation(np.zeros(3)), np.eye(3), atol=1e-15)


def test_bone_rotation_single_axis():
    got = bone_rotation(np.array([np.pi / 2, 0.0, 0.0]))
    assert np.allclose(got, axis_rotation("x", np.pi / 2), atol=1e-15)


def test_bone_rotation_matches_product_oracle(rng):
    # explicit three-factor product, x then y then z
    for triple in rng.uniform(-np.pi, np.pi, (50, 3)):
        expect = rotation_x(triple[0]) @ rotation_y(triple[1]) @ rotation_z(triple[2])
        assert np.allclose(bone_rotation(triple), expect, atol=1e-15)


def test_bone_rotation_batched(rng):
    triples = rng.uniform(-np.pi, np.pi, (7, 4, 3))
    mats = bone_rotation(triples)
    assert mats.shape == (7, 4, 3, 3)
    for i in range(7):
        for j in range(4):
            assert np.allclose(mats[i, j], bone_rotation(triples[i, j]), atol=1e-15)


def test_chain_transform_single():
    triple = np.array([0.3, -0.7, 1.1])
    assert np.allclose(chain_transform(triple[None]), bone_rotation(triple), atol=1e-15)


def test_chain_transform_same_axis_commutes():
    two = np.array([[0.0, 0.0, np.pi / 4], [0.0, 0.0, np.pi / 4]])
    assert np.allclose(chain_transform(two), axis_rotation("z", np.pi / 2), atol=1e-12)


def test_chain_transform_matches_sequential_oracle(rng):
    triples = rng.uniform(-np.pi, np.pi, (3, 3))
    acc = np.eye(3)
    for t in triples:
        acc = acc @ bone_rotation(t)
    assert np.allclose(chain_transform(triples), acc, atol=1e-14)


def test_chain_transform_rejects_empty():
    with pytest.raises(ValueError):
        chain_transform(np.zeros((0, 3)))


def test_fk_zero_angles_rest_pose(topo, rng):
    lengths = random_lengths(rng, topo.bone_count)
    root = np.array([10.0, -20.0, 3000.0])
    pose = forward_kinematics(np.zeros((topo.bone_count, 3)), lengths, root, topo)
    rest = np.asarray(topo.rest_directions)
    expect = np.zeros((topo.joint_count, 3))
    expect[topo.root_index] = root
    for b in topo.bone_order:
        child = topo.bone_children[b]
        expect[child] = expect[topo.parents[child]] + lengths[b] * rest[b]
    assert np.allclose(pose, expect, atol=1e-9)


def test_fk_single_bone_quarter_turn():
    t = SkeletonTopology(
        joint_names=("root", "tip"),
        parents=(-1, 0),
        rest_directions=np.array([[0.0, 0.0, 1.0]]),
        root_index=0,
    )
    angles = np.array([[np.pi / 2, 0.0, 0.0]])
    pose = forward_kinematics(angles, np.array([100.0]), np.zeros(3), t)
    # x-rotation takes +z to -y
    assert np.allclose(pose[1], [0.0, -100.0, 0.0], atol=1e-12)


def fk_chain_oracle(angles, lengths, root, topo):
    """Accumulate T_n = V_1...V_n per chain explicitly, then assemble."""
    joints = np.zeros((topo.joint_count, 3))
    joints[topo.root_index] = root
    for b in range(topo.bone_count):
        # walk up to the root, collecting the bone chain
        chain = []
        k = b
        while k >= 0:
            chain.append(k)
            k = topo.bone_parent_bone[k]
        chain.reverse()
        t = np.eye(3)
        for k in chain:
            t = t @ bone_rotation(angles[k])
        vec = t @ (lengths[b] * np.asarray(topo.rest_directions)[b])
        child = topo.bone_children[b]
        joints[child] = joints[topo.parents[child]] + vec
    return joints


def test_fk_matches_per_chain_oracle(topo, rng):
    for _ in range(10):
        angles = random_angles(rng, 1, topo.bone_count)[0]
        lengths = random_lengths(rng, topo.bone_count)
        root = rng.normal(0.0, 100.0, 3)
        got = forward_kinematics(angles, lengths, root, topo)
        expect = fk_chain_oracle(angles, lengths, root, topo)
        assert np.allclose(got, expect, atol=1e-9)


def test_fk_preserves_lengths(topo, rng):
    angles = random_angles(rng, 64, topo.bone_count)
    lengths = random_lengths(rng, topo.bone_count)
    roots = rng.normal(0.0, 100.0, (64, 3))
    poses = forward_kinematics_batch(angles, lengths, roots, topo)
    for pose in poses:
        got = np.linalg.norm(bones_of(pose, topo), axis=1)
        assert np.allclose(got, lengths, rtol=1e-9)


def test_fk_batch_matches_single(topo, rng):
    angles = random_angles(rng, 5, topo.bone_count)
    lengths = random_lengths(rng, topo.bone_count)
    roots = rng.normal(0.0, 100.0, (5, 3))
    batch = forward_kinematics_batch(angles, lengths, roots, topo)
    for i in range(5):
        single = forward_kinematics(angles[i], lengths, roots[i], topo)
        assert np.allclose(batch[i], single, atol=1e-12)


def test_ik_axis_aligned_bones():
    t = SkeletonTopology(
        joint_names=("root", "tip"),
        parents=(-1, 0),
        rest_directions=np.array([[0.0, 0.0, 1.0]]),
        root_index=0,
    )
    pose_z = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 70.0]])
    got = inverse_kinematics(pose_z, t)
    assert np.allclose(got[0], [np.pi / 2, np.pi / 2, 0.0], atol=1e-9)

    pose_x = np.array([[0.0, 0.0, 0.0], [70.0, 0.0, 0.0]])
    got = inverse_kinematics(pose_x, t)
    assert np.allclose(got[0], [0.0, np.pi / 2, np.pi / 2], atol=1e-9)


def test_ik_cosine_identity(topo, rng):
    angles = random_angles(rng, 32, topo.bone_count)
    lengths = random_lengths(rng, topo.bone_count)
    roots = rng.normal(0.0, 100.0, (32, 3))
    poses = forward_kinematics_batch(angles, lengths, roots, topo)
    for frame in ("parent", "camera"):
        cos = inverse_kinematics_batch(poses, topo, frame=frame)
        assert cos.shape == (32, topo.bone_count, 3)
        assert np.all(cos >= 0.0) and np.all(cos <= np.pi)
        sums = (np.cos(cos) ** 2).sum(axis=-1)
        assert np.allclose(sums, 1.0, atol=1e-9)


def test_ik_camera_frame_reads_raw_directions(topo, rng):
    pose = np.zeros((topo.joint_count, 3))
    rest = np.asarray(topo.rest_directions)
    for b in topo.bone_order:
        child = topo.bone_children[b]
        pose[child] = pose[topo.parents[child]] + 100.0 * rest[b]
    cos = inverse_kinematics(pose, topo, frame="camera")
    expect = np.arccos(np.clip(rest, -1.0, 1.0))
    assert np.allclose(cos, expect, atol=1e-9)


def test_ik_parent_frame_rest_pose_is_rest_angles(topo):
    # at rest every bone coincides with its rest direction in its own frame
    pose = np.zeros((topo.joint_count, 3))
    rest = np.asarray(topo.rest_directions)
    for b in topo.bone_order:
        child = topo.bone_children[b]
        pose[child] = pose[topo.parents[child]] + 250.0 * rest[b]
    cos = inverse_kinematics(pose, topo, frame="parent")
    expect = np.arccos(np.clip(rest, -1.0, 1.0))
    assert np.allclose(cos, expect, atol=1e-9)


def test_ik_rejects_zero_length_bone(topo):
    pose = np.zeros((topo.joint_count, 3))  # every bone degenerate
    with pytest.raises(DegeneratePoseError):
        inverse_kinematics(pose, topo)


def test_rotation_helpers_batched(rng):
    thetas = rng.uniform(-np.pi, np.pi, (6,))
    for fn in (rotation_x, rotation_y, rotation_z):
        mats = fn(thetas)
        assert mats.shape == (6, 3, 3)
        for m in mats:
            assert_rotation(m)


@settings(max_examples=60)
@given(st.integers(0, 2**31 - 1))
def test_rotations_orthonormal_property(seed):
    r = np.random.default_rng(seed)
    triple = r.uniform(-2 * np.pi, 2 * np.pi, 3)
    assert_rotation(bone_rotation(triple))
    chain = r.uniform(-np.pi, np.pi, (4, 3))
    assert_rotation(chain_transform(chain))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fk_length_preservation_property(seed):
    """Any angle matrix leaves the commanded bone lengths intact."""
    topo = default_topology()
    r = np.random.default_rng(seed)
    angles = r.uniform(-np.pi, np.pi, (topo.bone_count, 3))
    lengths = r.uniform(1.0, 999.0, topo.bone_count)
    pose = forward_kinematics(angles, lengths, np.zeros(3), topo)
    got = np.linalg.norm(bones_of(pose, topo), axis=1)
    assert np.allclose(got, lengths, rtol=1e-9)
