"""Pinhole projection of 3D poses to pixel coordinates.

Camera frame: x right, y down, z depth (mm). Image coordinates are
u = f_x * x / z + c_x and v = f_y * y / z + c_y in pixels. Points must
sit strictly in front of the camera.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateProjectionError
from .skeleton import SkeletonTopology


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = 1150.0
    fy: float = 1150.0
    cx: float = 500.0
    cy: float = 500.0
    width: int = 1000
    height: int = 1000

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise ConfigError(
                f"principal point ({self.cx}, {self.cy}) must sit inside "
                f"the {self.width}x{self.height} image"
            )

    def to_json_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy,
            "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CameraIntrinsics":
        known = {"fx", "fy", "cx", "cy", "width", "height"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown camera fields: {sorted(unknown)}")
        base = cls()
        kwargs = {k: type(getattr(base, k))(doc[k]) for k in doc}
        return cls(**kwargs)


def project(points: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Project (..., 3) mm points to (..., 2) pixel coordinates."""
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    nonpos = z <= 0.0
    if nonpos.any():
        flat = np.flatnonzero(nonpos.reshape(-1))
        idx = int(flat[0])
        joint = idx % points.shape[-2] if points.ndim >= 2 else idx
        raise DegenerateProjectionError(joint, float(z.reshape(-1)[idx]))
    u = cam.fx * points[..., 0] / z + cam.cx
    v = cam.fy * points[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def make_pairs(
    poses3d: np.ndarray, cam: CameraIntrinsics, topo: SkeletonTopology
) -> tuple[np.ndarray, np.ndarray]:
    """Build supervision pairs from absolute 3D poses.

    Returns (poses2d, poses3d_rel): absolute pixel coordinates of shape
    (K, J, 2) and root-relative mm coordinates of shape (K, J, 3). The
    root row of every 3D pose is identically zero.
    """
    poses3d = np.asarray(poses3d, dtype=np.float64)
    if poses3d.ndim != 3 or poses3d.shape[1:] != (topo.joint_count, 3):
        raise ValueError(
            f"poses3d shape {poses3d.shape}, expected (K, {topo.joint_count}, 3)"
        )
    poses2d = project(poses3d, cam)
    rel = poses3d - poses3d[:, topo.root_index : topo.root_index + 1, :]
    return poses2d, rel
