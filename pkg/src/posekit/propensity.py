"""Per-joint 2D histograms and pose propensity scores.

The propensity of a 2D pose under a dataset is the mean, over joints, of
the normalized bin frequency at each joint's pixel location. Histograms
for the ground-truth side are built from a configurable subsample
(default 25%); the generated side uses every sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

DEFAULT_BIN_COUNT = 64
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class HistogramMap:
    """Per-joint 2D frequency grids.

    edges_u, edges_v : (J, B + 1) strictly increasing bin edges in px
    freqs : (J, B, B) frequencies, indexed [joint, u_bin, v_bin];
        every grid sums to 1 and every bin is >= epsilon
    epsilon : smoothing floor applied at build time
    sample_count : poses the grids were estimated from
    """

    edges_u: np.ndarray
    edges_v: np.ndarray
    freqs: np.ndarray
    epsilon: float
    sample_count: int

    def __post_init__(self):
        for name in ("edges_u", "edges_v", "freqs"):
            getattr(self, name).setflags(write=False)
        if (np.diff(self.edges_u, axis=1) <= 0).any() or (
            np.diff(self.edges_v, axis=1) <= 0
        ).any():
            raise ValueError("histogram bin edges must be strictly increasing")

    @property
    def joint_count(self) -> int:
        return self.freqs.shape[0]

    @property
    def bin_count(self) -> int:
        return self.freqs.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "bin_count": int(self.bin_count),
            "epsilon": float(self.epsilon),
            "sample_count": int(self.sample_count),
            "edges_u": self.edges_u.tolist(),
            "edges_v": self.edges_v.tolist(),
            "freqs": self.freqs.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "HistogramMap":
        try:
            return cls(
                edges_u=np.asarray(doc["edges_u"], dtype=np.float64),
                edges_v=np.asarray(doc["edges_v"], dtype=np.float64),
                freqs=np.asarray(doc["freqs"], dtype=np.float64),
                epsilon=float(doc["epsilon"]),
                sample_count=int(doc["sample_count"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed histogram document: {exc}") from exc


def _axis_edges(values: np.ndarray, bin_count: int) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        # all-identical coordinates: widen the range by one pixel
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bin_count + 1)


def build_histogram(
    poses2d: np.ndarray,
    bin_count: int = DEFAULT_BIN_COUNT,
    epsilon: float = DEFAULT_EPSILON,
    edges: tuple[np.ndarray, np.ndarray] | None = None,
) -> HistogramMap:
    """Estimate per-joint frequency grids from (K, J, 2) pixel poses.

    Counts are normalized to frequencies per joint, floored so that no
    bin is below epsilon, and renormalized to sum exactly to 1. The
    floor is applied pre-normalization at epsilon / (1 - B^2 epsilon) so
    both properties hold simultaneously. Passing ``edges`` (a pair of
    (J, B+1) arrays) reuses existing bin boundaries instead of deriving
    them from the data.
    """
    poses2d = np.asarray(poses2d, dtype=np.float64)
    if poses2d.ndim != 3 or poses2d.shape[-1] != 2:
        raise ValueError(f"poses2d shape {poses2d.shape}, expected (K, J, 2)")
    if poses2d.shape[0] == 0:
        raise DataError("cannot build a histogram from an empty pose set")
    if not np.isfinite(poses2d).all():
        raise DataError("poses2d contains non-finite coordinates")
    if bin_count < 1:
        raise ConfigError(f"bin_count must be >= 1, got {bin_count}")
    if not (0.0 <= epsilon) or bin_count * bin_count * epsilon >= 1.0:
        raise ConfigError(
            f"epsilon {epsilon!r} invalid: need 0 <= epsilon and "
            f"bin_count^2 * epsilon < 1"
        )
    joints = poses2d.shape[1]

    if edges is None:
        edges_u = np.stack(
            [_axis_edges(poses2d[:, j, 0], bin_count) for j in range(joints)]
        )
        edges_v = np.stack(
            [_axis_edges(poses2d[:, j, 1], bin_count) for j in range(joints)]
        )
    else:
        edges_u = np.asarray(edges[0], dtype=np.float64)
        edges_v = np.asarray(edges[1], dtype=np.float64)
        if edges_u.shape != (joints, bin_count + 1) or edges_v.shape != (
            joints,
            bin_count + 1,
        ):
            raise ValueError(
                f"shared edges have shapes {edges_u.shape}/{edges_v.shape}, "
                f"expected {(joints, bin_count + 1)}"
            )

    floor = epsilon / (1.0 - bin_count * bin_count * epsilon) if epsilon > 0 else 0.0
    freqs = np.empty((joints, bin_count, bin_count), dtype=np.float64)
    for j in range(joints):
        u = np.clip(poses2d[:, j, 0], edges_u[j, 0], edges_u[j, -1])
        v = np.clip(poses2d[:, j, 1], edges_v[j, 0], edges_v[j, -1])
        counts, _, _ = np.histogram2d(u, v, bins=[edges_u[j], edges_v[j]])
        grid = counts / counts.sum()
        if floor > 0.0:
            grid = np.maximum(grid, floor)
            grid = grid / grid.sum()
        freqs[j] = grid

    return HistogramMap(
        edges_u=edges_u,
        edges_v=edges_v,
        freqs=freqs,
        epsilon=epsilon,
        sample_count=poses2d.shape[0],
    )


def build_gt_histogram(
    poses2d: np.ndarray,
    fraction: float,
    rng: np.random.Generator,
    bin_count: int = DEFAULT_BIN_COUNT,
    epsilon: float = DEFAULT_EPSILON,
    edges: tuple[np.ndarray, np.ndarray] | None = None,
) -> HistogramMap:
    """Histogram from a random ``fraction`` of the ground-truth poses."""
    if not (0.0 < fraction <= 1.0):
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    poses2d = np.asarray(poses2d, dtype=np.float64)
    n = poses2d.shape[0]
    take = max(1, int(np.ceil(fraction * n)))
    idx = rng.choice(n, size=min(take, n), replace=False)
    return build_histogram(poses2d[np.sort(idx)], bin_count, epsilon, edges)


def _bin_indices(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin of each value per joint; out-of-range clamps to the boundary bin.

    values: (..., J), edges: (J, B + 1). Matches np.histogram2d placement
    for in-range values (interior edges bin right, top edge bins last).
    """
    j = edges.shape[0]
    nbins = edges.shape[1] - 1
    out = np.empty(values.shape, dtype=np.intp)
    for jj in range(j):
        idx = np.searchsorted(edges[jj], values[..., jj], side="right") - 1
        out[..., jj] = np.clip(idx, 0, nbins - 1)
    return out


def propensity(pose2d: np.ndarray, hist: HistogramMap) -> float:
    """Mean per-joint frequency at the pose's pixel locations."""
    return float(propensity_batch(np.asarray(pose2d, dtype=np.float64)[None], hist)[0])


def propensity_batch(poses2d: np.ndarray, hist: HistogramMap) -> np.ndarray:
    """Vectorized propensity for (K, J, 2) poses; returns (K,)."""
    poses2d = np.asarray(poses2d, dtype=np.float64)
    if poses2d.ndim != 3 or poses2d.shape[1] != hist.joint_count or poses2d.shape[2] != 2:
        raise ValueError(
            f"poses2d shape {poses2d.shape}, expected (K, {hist.joint_count}, 2)"
        )
    iu = _bin_indices(poses2d[..., 0], hist.edges_u)
    iv = _bin_indices(poses2d[..., 1], hist.edges_v)
    jidx = np.arange(hist.joint_count)[None, :]
    vals = hist.freqs[jidx, iu, iv]  # (K, J)
    return vals.mean(axis=1)
