"""Skeleton topology and the pose data model.

Conventions used throughout the package:

* coordinates are millimetres in the camera frame: x right, y down,
  z depth away from the camera;
* a pose is a plain float64 array, shape (J, 3) for 3D and (J, 2) for
  2D pixel coordinates;
* bones are indexed by their child joint in ascending joint order, so
  bone k connects ``parents[child]`` -> ``child`` where ``child`` is the
  (k+1)-th non-root joint; M = J - 1;
* an angle matrix is an (M, 3) array of per-bone (x, y, z) rotation
  angles in radians;
* bone lengths are an (M,) array of positive millimetre lengths.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

MAX_BONE_LENGTH_MM = 1000.0
_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class SkeletonTopology:
    """Immutable kinematic tree.

    Attributes
    ----------
    joint_names : tuple of str, length J
    parents : tuple of int, length J; -1 marks the root
    rest_directions : (M, 3) float64, unit rest-pose direction of each
        bone in the camera frame, bone order as defined above
    root_index : index of the root joint
    """

    joint_names: tuple[str, ...]
    parents: tuple[int, ...]
    rest_directions: np.ndarray
    root_index: int

    # derived, filled by __post_init__
    bone_children: tuple[int, ...] = field(init=False)
    bone_parent_bone: tuple[int, ...] = field(init=False)
    bone_order: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        validate_topology(
            self.joint_names, self.parents, self.rest_directions, self.root_index
        )
        children = tuple(
            j for j in range(len(self.parents)) if j != self.root_index
        )
        bone_of_joint = {c: k for k, c in enumerate(children)}
        parent_bone = tuple(
            -1 if self.parents[c] == self.root_index else bone_of_joint[self.parents[c]]
            for c in children
        )
        depth = {}
        for c in children:
            d, cur = 0, c
            while cur != self.root_index:
                cur = self.parents[cur]
                d += 1
            depth[c] = d
        # parents always precede children when bones are walked in this order
        order = tuple(sorted(range(len(children)), key=lambda k: depth[children[k]]))
        object.__setattr__(self, "bone_children", children)
        object.__setattr__(self, "bone_parent_bone", parent_bone)
        object.__setattr__(self, "bone_order", order)
        self.rest_directions.setflags(write=False)

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    @property
    def bone_count(self) -> int:
        return len(self.joint_names) - 1

    def bone_index(self, child_joint: int) -> int:
        """Bone whose child joint is ``child_joint``."""
        if child_joint == self.root_index:
            raise ValueError("root joint has no incoming bone")
        return self.bone_children.index(child_joint)

    def to_json_dict(self) -> dict:
        return {
            "joints": list(self.joint_names),
            "parents": list(self.parents),
            "rest_directions": [[float(v) for v in row] for row in self.rest_directions],
            "root": self.root_index,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SkeletonTopology":
        try:
            joints = tuple(str(n) for n in doc["joints"])
            parents = tuple(int(p) for p in doc["parents"])
            rest = np.asarray(doc["rest_directions"], dtype=np.float64)
            root = int(doc["root"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed topology document: {exc}") from exc
        return cls(joints, parents, rest, root)

    def digest(self) -> str:
        """Stable identity of this topology, embedded in every artifact."""
        canon = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("ascii")).hexdigest()


def validate_topology(joint_names, parents, rest_directions, root_index) -> None:
    j = len(joint_names)
    if j < 2:
        raise ConfigError(f"topology needs at least 2 joints, got {j}")
    if len(parents) != j:
        raise ConfigError(f"parents has length {len(parents)}, expected {j}")
    if not (0 <= root_index < j):
        raise ConfigError(f"root_index {root_index} out of range for {j} joints")
    if parents[root_index] != -1:
        raise ConfigError("root joint must have parent -1")
    for jj, p in enumerate(parents):
        if jj == root_index:
            continue
        if not (0 <= p < j):
            raise ConfigError(f"joint {jj} has out-of-range parent {p}")
    # every joint must reach the root without cycles
    for jj in range(j):
        seen = 0
        cur = jj
        while cur != root_index:
            cur = parents[cur]
            seen += 1
            if seen > j:
                raise ConfigError(f"cycle in parents reachable from joint {jj}")
    rest = np.asarray(rest_directions, dtype=np.float64)
    if rest.shape != (j - 1, 3):
        raise ConfigError(
            f"rest_directions has shape {rest.shape}, expected {(j - 1, 3)}"
        )
    norms = np.linalg.norm(rest, axis=1)
    bad = np.abs(norms - 1.0) > _UNIT_TOL
    if bad.any():
        k = int(np.argmax(bad))
        raise ConfigError(
            f"rest direction {k} is not unit length (|v| = {norms[k]!r})"
        )


# Default topology: conventional 17-joint layout, versioned h36m17-v1.
# Rest stance is upright facing the camera, arms hanging at the sides;
# y points down in the camera frame, so "up" is -y.
_H36M17_NAMES = (
    "pelvis",
    "right_hip", "right_knee", "right_ankle",
    "left_hip", "left_knee", "left_ankle",
    "spine", "thorax", "neck", "head",
    "left_shoulder", "left_elbow", "left_wrist",
    "right_shoulder", "right_elbow", "right_wrist",
)
_H36M17_PARENTS = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15)
_H36M17_REST = np.array(
    [
        [-1.0, 0.0, 0.0],   # right_hip   <- pelvis
        [0.0, 1.0, 0.0],    # right_knee  <- right_hip
        [0.0, 1.0, 0.0],    # right_ankle <- right_knee
        [1.0, 0.0, 0.0],    # left_hip    <- pelvis
        [0.0, 1.0, 0.0],    # left_knee   <- left_hip
        [0.0, 1.0, 0.0],    # left_ankle  <- left_knee
        [0.0, -1.0, 0.0],   # spine       <- pelvis
        [0.0, -1.0, 0.0],   # thorax      <- spine
        [0.0, -1.0, 0.0],   # neck        <- thorax
        [0.0, -1.0, 0.0],   # head        <- neck
        [1.0, 0.0, 0.0],    # left_shoulder  <- thorax
        [0.0, 1.0, 0.0],    # left_elbow     <- left_shoulder
        [0.0, 1.0, 0.0],    # left_wrist     <- left_elbow
        [-1.0, 0.0, 0.0],   # right_shoulder <- thorax
        [0.0, 1.0, 0.0],    # right_elbow    <- right_shoulder
        [0.0, 1.0, 0.0],    # right_wrist    <- right_elbow
    ],
    dtype=np.float64,
)


def default_topology() -> SkeletonTopology:
    """The built-in 17-joint topology (h36m17-v1)."""
    return SkeletonTopology(
        _H36M17_NAMES, _H36M17_PARENTS, _H36M17_REST.copy(), 0
    )


def check_pose3d(pose, topo: SkeletonTopology) -> np.ndarray:
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape != (topo.joint_count, 3):
        raise DataError(
            f"pose3d has shape {pose.shape}, expected {(topo.joint_count, 3)}"
        )
    if not np.isfinite(pose).all():
        raise DataError("pose3d contains non-finite coordinates")
    return pose


def check_pose2d(pose, topo: SkeletonTopology) -> np.ndarray:
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape != (topo.joint_count, 2):
        raise DataError(
            f"pose2d has shape {pose.shape}, expected {(topo.joint_count, 2)}"
        )
    if not np.isfinite(pose).all():
        raise DataError("pose2d contains non-finite coordinates")
    return pose


def check_bone_lengths(lengths, topo: SkeletonTopology) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=np.float64)
    if lengths.shape != (topo.bone_count,):
        raise DataError(
            f"bone lengths have shape {lengths.shape}, expected {(topo.bone_count,)}"
        )
    if not np.isfinite(lengths).all():
        raise DataError("bone lengths contain non-finite values")
    if (lengths <= 0).any():
        k = int(np.argmax(lengths <= 0))
        raise DataError(f"bone {k} has non-positive length {lengths[k]!r}")
    if (lengths >= MAX_BONE_LENGTH_MM).any():
        k = int(np.argmax(lengths >= MAX_BONE_LENGTH_MM))
        raise DataError(
            f"bone {k} has implausible length {lengths[k]:.1f} mm "
            f"(limit {MAX_BONE_LENGTH_MM:.0f})"
        )
    return lengths


def check_angle_matrix(angles, topo: SkeletonTopology) -> np.ndarray:
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (topo.bone_count, 3):
        raise DataError(
            f"angle matrix has shape {angles.shape}, expected {(topo.bone_count, 3)}"
        )
    if not np.isfinite(angles).all():
        raise DataError("angle matrix contains non-finite values")
    if (np.abs(angles) > np.pi).any():
        raise DataError("angle matrix entries must lie in [-pi, pi]")
    return angles


def bones_of(pose3d: np.ndarray, topo: SkeletonTopology) -> np.ndarray:
    """Bone vectors child - parent, shape (M, 3). Works on (..., J, 3)."""
    pose3d = np.asarray(pose3d, dtype=np.float64)
    children = list(topo.bone_children)
    parents = [topo.parents[c] for c in children]
    return pose3d[..., children, :] - pose3d[..., parents, :]


def assemble_pose(bones: np.ndarray, root_position, topo: SkeletonTopology) -> np.ndarray:
    """Inverse of :func:`bones_of`: prefix-sum bone vectors down the tree.

    Accepts (..., M, 3) bones and broadcastable root positions.
    """
    bones = np.asarray(bones, dtype=np.float64)
    root = np.asarray(root_position, dtype=np.float64)
    lead = bones.shape[:-2]
    out = np.zeros(lead + (topo.joint_count, 3), dtype=np.float64)
    out[..., topo.root_index, :] = root
    for k in topo.bone_order:
        child = topo.bone_children[k]
        parent = topo.parents[child]
        out[..., child, :] = out[..., parent, :] + bones[..., k, :]
    return out
