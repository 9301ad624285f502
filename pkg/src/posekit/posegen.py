"""Sequence-level synthetic pose generation.

Per-action angle ranges are extracted from seed poses via direction
cosines, padded, and clamped to [0, pi]. A sequence draws T keyframe
angle matrices uniformly inside the ranges and fills N frames per
segment with linear interpolation; the segment into the first keyframe
wraps from the last one, so every sequence holds exactly K = N * T
frames and every frame's angle matrix stays inside the padded ranges.
Each sequence picks one bone-length template, one root position inside
a box, and one global rotation applied about the root after forward
kinematics.

Randomness is drawn from per-sequence streams derived from
(rng_seed, sequence_index), so parallel and serial generation produce
identical datasets.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .kinematics import (
    IK_FRAMES,
    bone_rotation,
    forward_kinematics_batch,
    inverse_kinematics_batch,
)
from .skeleton import SkeletonTopology, bones_of

DEFAULT_RANGE_PADDING = 0.05  # radians


@dataclass(frozen=True)
class AngleRangeProfile:
    """Per-bone, per-axis angle bounds for one action, inside [0, pi]."""

    action: str
    lo: np.ndarray  # (M, 3)
    hi: np.ndarray  # (M, 3)
    seed_count: int = 0

    def __post_init__(self):
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 2 or self.lo.shape[1] != 3:
            raise ValueError(
                f"range bounds must both be (M, 3), got {self.lo.shape} and {self.hi.shape}"
            )
        if (self.lo < 0).any() or (self.hi > np.pi).any() or (self.lo > self.hi).any():
            raise ValueError(
                f"profile {self.action!r} has bounds outside [0, pi] or lo > hi"
            )


@dataclass(frozen=True)
class BoneLengthTemplates:
    """A small pool of per-body bone lengths, one row per template."""

    actions: tuple[str, ...]
    lengths: np.ndarray  # (n_templates, M)

    def __post_init__(self):
        self.lengths.setflags(write=False)
        if self.lengths.ndim != 2 or self.lengths.shape[0] != len(self.actions):
            raise ValueError(
                f"templates misshaped: {len(self.actions)} actions vs "
                f"{self.lengths.shape} lengths"
            )
        if (self.lengths <= 0).any():
            raise ValueError("template bone lengths must be positive")

    @property
    def count(self) -> int:
        return self.lengths.shape[0]


@dataclass(frozen=True)
class GeneratorConfig:
    keyframes_per_sequence: int = 5  # T
    inter_frames: int = 10  # N
    sequences_per_action: int = 4
    seed_samples_per_action: int = 20
    range_padding: float = DEFAULT_RANGE_PADDING
    ik_frame: str = "parent"
    root_x: tuple[float, float] = (-500.0, 500.0)
    root_y: tuple[float, float] = (-500.0, 500.0)
    root_z: tuple[float, float] = (3000.0, 6000.0)
    # per-axis (lo, hi) of the global rotation triple; zeros disable it
    global_rotation: tuple[tuple[float, float], ...] = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    rng_seed: int = 0

    def __post_init__(self):
        if self.keyframes_per_sequence < 2:
            raise ConfigError(
                f"keyframes_per_sequence must be >= 2, got {self.keyframes_per_sequence}"
            )
        if self.inter_frames < 1:
            raise ConfigError(f"inter_frames must be >= 1, got {self.inter_frames}")
        if self.sequences_per_action < 1:
            raise ConfigError(
                f"sequences_per_action must be >= 1, got {self.sequences_per_action}"
            )
        if self.seed_samples_per_action < 1:
            raise ConfigError(
                f"seed_samples_per_action must be >= 1, got {self.seed_samples_per_action}"
            )
        if self.range_padding < 0:
            raise ConfigError(f"range_padding must be >= 0, got {self.range_padding}")
        if self.ik_frame not in IK_FRAMES:
            raise ConfigError(
                f"ik_frame {self.ik_frame!r} not in {IK_FRAMES}"
            )
        for name in ("root_x", "root_y", "root_z"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ConfigError(f"{name} range is inverted: ({lo}, {hi})")
        if self.root_z[0] <= 0:
            raise ConfigError(
                f"root_z must stay in front of the camera, got {self.root_z}"
            )
        if len(self.global_rotation) != 3 or any(
            len(pair) != 2 or pair[1] < pair[0] for pair in self.global_rotation
        ):
            raise ConfigError(
                f"global_rotation must be three (lo, hi) pairs, got {self.global_rotation}"
            )

    @property
    def frames_per_sequence(self) -> int:
        return self.keyframes_per_sequence * self.inter_frames


@dataclass
class GeneratedSequence:
    action: str
    sequence_id: int
    bone_lengths: np.ndarray  # (M,)
    root_position: np.ndarray  # (3,)
    global_rotation: np.ndarray  # (3,)
    angles: np.ndarray  # (K, M, 3)
    joints3d: np.ndarray  # (K, J, 3)


def subsample_seeds(
    seeds_by_action: dict[str, np.ndarray],
    per_action: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    """Pick at most per_action seed poses per action, preserving order."""
    out = {}
    for action in sorted(seeds_by_action):
        poses = np.asarray(seeds_by_action[action], dtype=np.float64)
        if poses.shape[0] > per_action:
            idx = np.sort(rng.choice(poses.shape[0], size=per_action, replace=False))
            poses = poses[idx]
        out[action] = poses
    return out


def extract_ranges(
    seeds_by_action: dict[str, np.ndarray],
    topo: SkeletonTopology,
    padding: float = DEFAULT_RANGE_PADDING,
    ik_frame: str = "parent",
) -> list[AngleRangeProfile]:
    """Per-action min/max of seed direction cosines, padded and clamped.

    seeds_by_action maps an action name to a (K, J, 3) pose array.
    Profiles come back sorted by action name.
    """
    if not seeds_by_action:
        raise DataError("no seed actions given")
    profiles = []
    for action in sorted(seeds_by_action):
        poses = np.asarray(seeds_by_action[action], dtype=np.float64)
        if poses.ndim != 3 or poses.shape[0] == 0:
            raise DataError(f"action {action!r} has no seed poses")
        angles = inverse_kinematics_batch(poses, topo, ik_frame)
        lo = np.clip(angles.min(axis=0) - padding, 0.0, np.pi)
        hi = np.clip(angles.max(axis=0) + padding, 0.0, np.pi)
        profiles.append(
            AngleRangeProfile(action, lo, hi, seed_count=poses.shape[0])
        )
    return profiles


def extract_templates(
    seeds_by_action: dict[str, np.ndarray], topo: SkeletonTopology
) -> BoneLengthTemplates:
    """One bone-length row per seed pose."""
    actions: list[str] = []
    rows: list[np.ndarray] = []
    for action in sorted(seeds_by_action):
        poses = np.asarray(seeds_by_action[action], dtype=np.float64)
        lengths = np.linalg.norm(bones_of(poses, topo), axis=-1)
        for row in lengths:
            actions.append(action)
            rows.append(row)
    if not rows:
        raise DataError("no seed poses to extract templates from")
    return BoneLengthTemplates(tuple(actions), np.stack(rows))


def sample_keyframes(
    profile: AngleRangeProfile, count: int, rng: np.random.Generator
) -> np.ndarray:
    """(count, M, 3) keyframe angle matrices, uniform inside the profile."""
    if count < 1:
        raise ConfigError(f"keyframe count must be >= 1, got {count}")
    return rng.uniform(profile.lo, profile.hi, size=(count,) + profile.lo.shape)


def interpolate(a_prev: np.ndarray, a_next: np.ndarray, n: int) -> np.ndarray:
    """Frames prev + i*(next - prev)/n for i = 1..n; frame n is exactly
    a_next (assigned, not recomputed)."""
    if n < 1:
        raise ConfigError(f"inter-frame count must be >= 1, got {n}")
    a_prev = np.asarray(a_prev, dtype=np.float64)
    a_next = np.asarray(a_next, dtype=np.float64)
    if a_prev.shape != a_next.shape:
        raise ValueError(
            f"keyframe shape mismatch: {a_prev.shape} vs {a_next.shape}"
        )
    steps = np.arange(1, n + 1, dtype=np.float64) / n
    steps = steps.reshape((n,) + (1,) * a_prev.ndim)
    out = a_prev[None] + steps * (a_next - a_prev)[None]
    out[-1] = a_next
    return out


def sequence_angles(keyframes: np.ndarray, inter_frames: int) -> np.ndarray:
    """Concatenate wrap-around segments: T keyframes -> (T * N, M, 3)."""
    keyframes = np.asarray(keyframes, dtype=np.float64)
    t = keyframes.shape[0]
    segments = [
        interpolate(keyframes[i - 1], keyframes[i], inter_frames) for i in range(t)
    ]
    return np.concatenate(segments, axis=0)


def global_rotation(
    pose3d: np.ndarray, triple: np.ndarray, topo: SkeletonTopology
) -> np.ndarray:
    """Rigidly rotate joints about the root. Works on (..., J, 3)."""
    pose3d = np.asarray(pose3d, dtype=np.float64)
    rot = bone_rotation(np.asarray(triple, dtype=np.float64))
    root = pose3d[..., topo.root_index : topo.root_index + 1, :]
    return root + np.einsum("ij,...kj->...ki", rot, pose3d - root)


def generate_sequence(
    profile: AngleRangeProfile,
    templates: BoneLengthTemplates,
    cfg: GeneratorConfig,
    topo: SkeletonTopology,
    sequence_id: int,
) -> GeneratedSequence:
    """Build one sequence from its own (rng_seed, sequence_id) stream.

    Draw order: keyframes, template index, root position, global
    rotation triple.
    """
    rng = np.random.default_rng(np.random.SeedSequence((cfg.rng_seed, sequence_id)))
    keyframes = sample_keyframes(profile, cfg.keyframes_per_sequence, rng)
    angles = sequence_angles(keyframes, cfg.inter_frames)

    template_idx = int(rng.integers(templates.count))
    lengths = templates.lengths[template_idx]

    root = np.array(
        [
            rng.uniform(*cfg.root_x),
            rng.uniform(*cfg.root_y),
            rng.uniform(*cfg.root_z),
        ]
    )
    rot_triple = np.array([rng.uniform(lo, hi) for lo, hi in cfg.global_rotation])

    joints = forward_kinematics_batch(angles, lengths, root, topo)
    if np.any(rot_triple != 0.0):
        joints = global_rotation(joints, rot_triple, topo)
    return GeneratedSequence(
        action=profile.action,
        sequence_id=sequence_id,
        bone_lengths=lengths.copy(),
        root_position=root,
        global_rotation=rot_triple,
        angles=angles,
        joints3d=joints,
    )


def generate_dataset(
    profiles: list[AngleRangeProfile],
    templates: BoneLengthTemplates,
    cfg: GeneratorConfig,
    topo: SkeletonTopology,
    workers: int = 1,
) -> list[GeneratedSequence]:
    """All sequences for all profiles: sequences_per_action per action.

    Sequence ids run 0..len(profiles)*sequences_per_action-1 in
    (profile order, then sequence) order. Output is identical for any
    worker count.
    """
    if not profiles:
        raise DataError("no action profiles to generate from")
    if templates.count < 1:
        raise DataError("no bone-length templates to generate with")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    jobs = []
    seq_id = 0
    for profile in profiles:
        for _ in range(cfg.sequences_per_action):
            jobs.append((profile, seq_id))
            seq_id += 1

    if workers == 1:
        return [
            generate_sequence(profile, templates, cfg, topo, sid)
            for profile, sid in jobs
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(generate_sequence, profile, templates, cfg, topo, sid)
            for profile, sid in jobs
        ]
        return [f.result() for f in futures]
