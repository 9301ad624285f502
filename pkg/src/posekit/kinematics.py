"""Forward and inverse kinematics on the bone tree.

Forward kinematics rotates each rest-pose bone by the left product of
per-bone rotation matrices accumulated from the root outward: a bone's
rotation is V = R_x(a_x) @ R_y(a_y) @ R_z(a_z) (exactly that order), and
the transform applied to bone n with root-to-bone chain (1..n) is
T_n = V_1 @ V_2 @ ... @ V_n.

Inverse kinematics here extracts per-bone direction cosines: for a bone
vector v expressed in its local frame, the angles are
arccos(v_x / |v|), arccos(v_y / |v|), arccos(v_z / |v|), each in [0, pi]
with cos^2 summing to 1. Direction cosines do not invert the Euler
product above; they are only used to regulate sampling ranges.

The local frame is selectable: "camera" uses raw camera coordinates for
every bone; "parent" (default) accumulates, along the chain, the minimal
rotation taking each bone's rest direction onto its observed direction,
so a bone's cosines are measured relative to its parent chain's
orientation estimate. Root-adjacent bones use the camera frame either
way.
"""

from __future__ import annotations

import numpy as np

from .errors import DegeneratePoseError
from .skeleton import SkeletonTopology, bones_of

IK_FRAMES = ("parent", "camera")
_ZERO_LENGTH_TOL = 1e-8


def rotation_x(angle) -> np.ndarray:
    """R_x for scalar or batched angles; output shape angle.shape + (3, 3)."""
    a = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3), dtype=np.float64)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out


def rotation_y(angle) -> np.ndarray:
    a = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3), dtype=np.float64)
    out[..., 1, 1] = 1.0
    out[..., 0, 0] = c
    out[..., 0, 2] = s
    out[..., 2, 0] = -s
    out[..., 2, 2] = c
    return out


def rotation_z(angle) -> np.ndarray:
    a = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (3, 3), dtype=np.float64)
    out[..., 2, 2] = 1.0
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


_AXIS_BUILDERS = {"x": rotation_x, "y": rotation_y, "z": rotation_z}


def axis_rotation(axis: str, angle: float) -> np.ndarray:
    """Single-axis rotation matrix. axis is one of 'x', 'y', 'z'."""
    try:
        build = _AXIS_BUILDERS[axis]
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}, expected one of x, y, z") from None
    value = float(angle)
    if not np.isfinite(value):
        raise ValueError(f"angle must be finite, got {value}")
    return build(value)


def bone_rotation(angles) -> np.ndarray:
    """V(a) = R_x(a_x) @ R_y(a_y) @ R_z(a_z) for one (3,) angle triple
    or a batch (..., 3)."""
    a = np.asarray(angles, dtype=np.float64)
    if a.shape[-1] != 3:
        raise ValueError(f"angles must end in axis 3, got shape {a.shape}")
    rx = rotation_x(a[..., 0])
    ry = rotation_y(a[..., 1])
    rz = rotation_z(a[..., 2])
    return rx @ ry @ rz


def chain_transform(angle_rows) -> np.ndarray:
    """Accumulated transform of a root-to-bone chain: V_1 @ V_2 @ ... @ V_n.

    angle_rows is an (n, 3) array ordered root-outward, n >= 1.
    """
    rows = np.asarray(angle_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 3 or rows.shape[0] < 1:
        raise ValueError(f"expected a non-empty (n, 3) chain, got shape {rows.shape}")
    out = bone_rotation(rows[0])
    for row in rows[1:]:
        out = out @ bone_rotation(row)
    return out


def forward_kinematics_batch(
    angles: np.ndarray,
    lengths: np.ndarray,
    root_positions: np.ndarray,
    topo: SkeletonTopology,
) -> np.ndarray:
    """Pose a batch of frames.

    Parameters
    ----------
    angles : (K, M, 3) rotation angles per frame and bone
    lengths : (M,) or (K, M) bone lengths in mm
    root_positions : (3,) or (K, 3) root joint position in mm
    topo : skeleton

    Returns
    -------
    (K, J, 3) joint positions.
    """
    angles = np.asarray(angles, dtype=np.float64)
    k, m = angles.shape[0], topo.bone_count
    if angles.shape != (k, m, 3):
        raise ValueError(f"angles shape {angles.shape}, expected (K, {m}, 3)")
    lengths = np.broadcast_to(np.asarray(lengths, dtype=np.float64), (k, m))
    roots = np.broadcast_to(
        np.asarray(root_positions, dtype=np.float64), (k, 3)
    )

    v = bone_rotation(angles)  # (K, M, 3, 3)
    t = np.empty_like(v)
    for b in topo.bone_order:
        pb = topo.bone_parent_bone[b]
        if pb < 0:
            t[:, b] = v[:, b]
        else:
            t[:, b] = t[:, pb] @ v[:, b]

    rest = topo.rest_directions  # (M, 3)
    scaled = rest[None, :, :] * lengths[:, :, None]  # (K, M, 3)
    rotated = np.einsum("kmij,kmj->kmi", t, scaled)

    joints = np.empty((k, topo.joint_count, 3), dtype=np.float64)
    joints[:, topo.root_index] = roots
    for b in topo.bone_order:
        child = topo.bone_children[b]
        joints[:, child] = joints[:, topo.parents[child]] + rotated[:, b]
    return joints


def forward_kinematics(
    angles: np.ndarray,
    lengths: np.ndarray,
    root_position: np.ndarray,
    topo: SkeletonTopology,
) -> np.ndarray:
    """Single-frame forward kinematics; see :func:`forward_kinematics_batch`."""
    out = forward_kinematics_batch(
        np.asarray(angles, dtype=np.float64)[None], lengths, root_position, topo
    )
    return out[0]


def _minimal_rotation(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Shortest-arc rotation taking unit vector src onto unit vector dst.

    Batched over leading axes. Antiparallel pairs rotate pi about an
    arbitrary axis perpendicular to src.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    axis = np.cross(src, dst)
    cos = np.einsum("...i,...i->...", src, dst)
    sin_sq = np.einsum("...i,...i->...", axis, axis)

    eye = np.broadcast_to(np.eye(3), src.shape[:-1] + (3, 3)).copy()
    kx = np.zeros(src.shape[:-1] + (3, 3), dtype=np.float64)
    kx[..., 0, 1] = -axis[..., 2]
    kx[..., 0, 2] = axis[..., 1]
    kx[..., 1, 0] = axis[..., 2]
    kx[..., 1, 2] = -axis[..., 0]
    kx[..., 2, 0] = -axis[..., 1]
    kx[..., 2, 1] = axis[..., 0]
    # Rodrigues with unnormalized axis: R = I + K + K^2 (1 - c) / s^2
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(sin_sq > 1e-24, (1.0 - cos) / np.where(sin_sq > 1e-24, sin_sq, 1.0), 0.0)
    rot = eye + kx + (kx @ kx) * factor[..., None, None]

    # near-parallel: identity already handled (factor -> 0, K -> 0).
    # antiparallel: rotate pi about any axis perpendicular to src.
    anti = (sin_sq <= 1e-24) & (cos < 0.0)
    if anti.any():
        flat_rot = rot.reshape(-1, 3, 3)
        flat_src = src.reshape(-1, 3)
        for idx in np.flatnonzero(anti.reshape(-1)):
            s = flat_src[idx]
            helper = np.array([1.0, 0.0, 0.0])
            if abs(s[0]) > 0.9:
                helper = np.array([0.0, 1.0, 0.0])
            perp = np.cross(s, helper)
            perp /= np.linalg.norm(perp)
            flat_rot[idx] = 2.0 * np.outer(perp, perp) - np.eye(3)
        rot = flat_rot.reshape(rot.shape)
    return rot


def inverse_kinematics_batch(
    poses: np.ndarray, topo: SkeletonTopology, frame: str = "parent"
) -> np.ndarray:
    """Direction-cosine angles for a batch of poses.

    Parameters
    ----------
    poses : (K, J, 3) joint positions in mm
    topo : skeleton
    frame : "parent" or "camera"; see module docstring

    Returns
    -------
    (K, M, 3) angles, each in [0, pi], with cos^2 summing to 1 per bone.
    """
    if frame not in IK_FRAMES:
        raise ValueError(f"unknown ik frame {frame!r}, expected one of {IK_FRAMES}")
    poses = np.asarray(poses, dtype=np.float64)
    if not np.isfinite(poses).all():
        raise DegeneratePoseError("pose batch contains non-finite coordinates")
    bones = bones_of(poses, topo)  # (K, M, 3)
    norms = np.linalg.norm(bones, axis=-1)
    if (norms < _ZERO_LENGTH_TOL).any():
        k, b = np.argwhere(norms < _ZERO_LENGTH_TOL)[0]
        raise DegeneratePoseError(
            f"bone {b} of pose {k} has near-zero length {norms[k, b]!r} mm"
        )
    units = bones / norms[..., None]

    if frame == "camera":
        local = units
    else:
        nkeys = poses.shape[0]
        local = np.empty_like(units)
        frames = np.empty((nkeys, topo.bone_count, 3, 3), dtype=np.float64)
        rest = topo.rest_directions
        for b in topo.bone_order:
            pb = topo.bone_parent_bone[b]
            if pb < 0:
                base = np.broadcast_to(np.eye(3), (nkeys, 3, 3))
            else:
                base = frames[:, pb]
            v = np.einsum("kji,kj->ki", base, units[:, b])  # base^T @ u
            local[:, b] = v
            own = _minimal_rotation(np.broadcast_to(rest[b], v.shape), v)
            frames[:, b] = base @ own

    return np.arccos(np.clip(local, -1.0, 1.0))


def inverse_kinematics(
    pose: np.ndarray, topo: SkeletonTopology, frame: str = "parent"
) -> np.ndarray:
    """Single-pose direction-cosine extraction; see the batch variant."""
    return inverse_kinematics_batch(
        np.asarray(pose, dtype=np.float64)[None], topo, frame
    )[0]
