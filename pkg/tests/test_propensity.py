import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.errors import ConfigError, DataError
from posekit.propensity import (
    HistogramMap,
    build_gt_histogram,
    build_histogram,
    propensity,
    propensity_batch,
)


def cloud(rng, n=400, joints=3, spread=120.0):
    return rng.normal(500.0, spread, (n, joints, 2))


def test_frequencies_sum_to_one(rng):
    h = build_histogram(cloud(rng), bin_count=16)
    sums = h.freqs.sum(axis=(1, 2))
    assert np.allclose(sums, 1.0, atol=1e-12)


def test_no_zero_bins(rng):
    h = build_histogram(cloud(rng), bin_count=16, epsilon=1e-6)
    assert h.freqs.min() >= 1e-6


def test_point_mass_without_smoothing():
    poses = np.full((50, 2, 2), 333.0)
    h = build_histogram(poses, bin_count=4, epsilon=0.0)
    for j in range(2):
        f = h.freqs[j]
        assert f.max() == pytest.approx(1.0)
        assert f.sum() == pytest.approx(1.0)
        assert np.count_nonzero(f) == 1


def test_uniform_grid_counts():
    # samples at bin centers of a 4x4 grid over [0, 4)
    centers = np.arange(4) + 0.5
    uu, vv = np.meshgrid(centers, centers, indexing="ij")
    pts = np.stack([uu.ravel(), vv.ravel()], axis=1)
    poses = pts[:, None, :]  # one joint
    edges = (np.array([[0.0, 1.0, 2.0, 3.0, 4.0]]),) * 2
    h = build_histogram(poses, bin_count=4, epsilon=0.0, edges=edges)
    assert np.allclose(h.freqs[0], 1.0 / 16.0, atol=1e-12)


def test_zero_width_axis_widened():
    poses = np.zeros((10, 1, 2))
    poses[:, 0, 0] = 7.0  # u constant, v constant too
    h = build_histogram(poses, bin_count=4)
    assert h.edges_u[0, 0] < 7.0 < h.edges_u[0, -1]
    assert np.all(np.diff(h.edges_u[0]) > 0)


def test_empty_input_rejected():
    with pytest.raises(DataError):
        build_histogram(np.zeros((0, 3, 2)), bin_count=8)


def test_epsilon_too_large_rejected(rng):
    with pytest.raises(ConfigError):
        build_histogram(cloud(rng), bin_count=64, epsilon=1e-3)  # B^2 eps >= 1


def test_propensity_single_joint_lookup(rng):
    poses = cloud(rng, joints=1)
    h = build_histogram(poses, bin_count=8)
    x = poses[17]
    # brute-force bin lookup
    iu = np.searchsorted(h.edges_u[0], x[0, 0], side="right") - 1
    iv = np.searchsorted(h.edges_v[0], x[0, 1], side="right") - 1
    iu = min(max(iu, 0), h.bin_count - 1)
    iv = min(max(iv, 0), h.bin_count - 1)
    assert propensity(x, h) == pytest.approx(h.freqs[0, iu, iv], abs=1e-15)


def test_propensity_mean_over_joints():
    # joint 0's query bin holds 0.1, joint 1's holds 0.3 -> mean 0.2
    h = HistogramMap(
        edges_u=np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 2.0]]),
        edges_v=np.array([[0.0, 2.0], [0.0, 2.0]]),
        freqs=np.array(
            [[[0.1], [0.9]], [[0.3], [0.7]]]
        ),
        epsilon=0.0,
        sample_count=1,
    )
    x = np.array([[0.5, 0.5], [0.5, 0.5]])  # both land in the first u bin
    assert propensity(x, h) == pytest.approx(0.2)


def test_propensity_matches_brute_force_oracle(rng):
    poses = cloud(rng, n=300, joints=4)
    h = build_histogram(poses, bin_count=12)
    queries = cloud(rng, n=40, joints=4)
    got = propensity_batch(queries, h)
    for k in range(40):
        per_joint = []
        for j in range(4):
            u, v = queries[k, j]
            iu = int(np.searchsorted(h.edges_u[j], u, side="right")) - 1
            iv = int(np.searchsorted(h.edges_v[j], v, side="right")) - 1
            iu = min(max(iu, 0), h.bin_count - 1)
            iv = min(max(iv, 0), h.bin_count - 1)
            per_joint.append(h.freqs[j, iu, iv])
        assert got[k] == pytest.approx(np.mean(per_joint), abs=1e-15)


def test_out_of_range_clamps_to_boundary(rng):
    poses = cloud(rng, joints=1)
    h = build_histogram(poses, bin_count=8)
    far = np.array([[1e9, -1e9]])
    rho = propensity(far, h)
    assert rho == pytest.approx(h.freqs[0, -1, 0], abs=1e-15)


def test_propensity_positive_everywhere(rng):
    poses = cloud(rng, joints=2)
    h = build_histogram(poses, bin_count=16, epsilon=1e-6)
    queries = rng.uniform(-1e4, 1e4, (200, 2, 2))
    rho = propensity_batch(queries, h)
    assert np.all(rho > 0.0)
    assert np.all(rho <= 1.0)


def test_gt_histogram_fraction_one_equals_full(rng):
    poses = cloud(rng)
    full = build_histogram(poses, bin_count=8)
    sub = build_gt_histogram(poses, 1.0, np.random.default_rng(0), bin_count=8)
    assert np.array_equal(sub.freqs, full.freqs)
    assert np.array_equal(sub.edges_u, full.edges_u)


def test_gt_histogram_subsample_count(rng):
    poses = cloud(rng, n=1000)
    h = build_gt_histogram(poses, 0.25, np.random.default_rng(1), bin_count=8)
    assert h.sample_count == 250
    h = build_gt_histogram(cloud(rng, n=401), 0.25, np.random.default_rng(1), bin_count=8)
    assert h.sample_count == 101  # ceil(0.25 * 401)


def test_gt_histogram_deterministic(rng):
    poses = cloud(rng)
    a = build_gt_histogram(poses, 0.3, np.random.default_rng(7), bin_count=8)
    b = build_gt_histogram(poses, 0.3, np.random.default_rng(7), bin_count=8)
    assert np.array_equal(a.freqs, b.freqs)


def test_gt_histogram_fraction_bounds(rng):
    poses = cloud(rng)
    with pytest.raises(ConfigError):
        build_gt_histogram(poses, 0.0, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        build_gt_histogram(poses, 1.5, np.random.default_rng(0))


def test_histogram_json_round_trip(rng):
    h = build_histogram(cloud(rng), bin_count=8)
    again = HistogramMap.from_json_dict(h.to_json_dict())
    assert np.array_equal(again.freqs, h.freqs)
    assert np.array_equal(again.edges_u, h.edges_u)
    assert np.array_equal(again.edges_v, h.edges_v)
    assert again.epsilon == h.epsilon
    assert again.sample_count == h.sample_count


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([4, 8, 16]))
def test_histogram_invariants_property(seed, bins):
    """Sum-to-one and floor hold for arbitrary clouds and bin counts."""
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 200))
    poses = r.normal(0.0, r.uniform(0.1, 500.0), (n, 2, 2))
    h = build_histogram(poses, bin_count=bins, epsilon=1e-6)
    assert np.allclose(h.freqs.sum(axis=(1, 2)), 1.0, atol=1e-12)
    assert h.freqs.min() >= 1e-6
    assert np.all(np.diff(h.edges_u, axis=1) > 0)
    assert np.all(np.diff(h.edges_v, axis=1) > 0)
