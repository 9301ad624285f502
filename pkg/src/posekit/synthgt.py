"""Fabricated ground-truth datasets.

Real ground truth is any JSONL dataset with source="gt" records (see
records.py); this module manufactures one procedurally so the full
pipeline and its benchmarks run with zero external downloads. Two
hand-authored pseudo-actions with visibly different silhouettes are
provided: "stroll" (upright, small joint excursions) and "floorwork"
(deep flexion everywhere). A maker spec picks the action mix, so skewed
and balanced sets come from the same machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, project
from .errors import ConfigError
from .posegen import (
    AngleRangeProfile,
    BoneLengthTemplates,
    GeneratorConfig,
    generate_sequence,
)
from .records import Dataset, DatasetRecord
from .skeleton import SkeletonTopology

# bone order: r_hip, r_femur, r_tibia, l_hip, l_femur, l_tibia,
# spine, thorax, neck, head, l_shoulder, l_upper_arm, l_forearm,
# r_shoulder, r_upper_arm, r_forearm
_BASE_LENGTHS_MM = np.array(
    [130.0, 450.0, 440.0, 130.0, 450.0, 440.0,
     230.0, 250.0, 120.0, 115.0,
     150.0, 280.0, 250.0,
     150.0, 280.0, 250.0]
)

_STROLL = {
    (0, 3): ((0.0, 0.25), (0.0, 0.25), (0.0, 0.25)),      # pelvis offsets
    (1, 4): ((0.0, 0.55), (0.0, 0.30), (0.0, 0.30)),      # femurs
    (2, 5): ((0.0, 0.50), (0.0, 0.25), (0.0, 0.25)),      # tibias
    (6, 7): ((0.0, 0.20), (0.0, 0.20), (0.0, 0.20)),      # spine, thorax
    (8, 9): ((0.0, 0.25), (0.0, 0.25), (0.0, 0.25)),      # neck, head
    (10, 13): ((0.0, 0.30), (0.0, 0.30), (0.0, 0.30)),    # shoulders
    (11, 14): ((0.0, 0.60), (0.0, 0.30), (0.0, 0.30)),    # upper arms
    (12, 15): ((0.0, 0.60), (0.0, 0.30), (0.0, 0.30)),    # forearms
}

_FLOORWORK = {
    (0, 3): ((0.0, 0.40), (0.0, 0.40), (0.0, 0.40)),
    (1, 4): ((1.00, 2.00), (0.0, 0.50), (0.0, 0.50)),
    (2, 5): ((1.20, 2.40), (0.0, 0.40), (0.0, 0.40)),
    (6, 7): ((0.50, 1.30), (0.0, 0.40), (0.0, 0.40)),
    (8, 9): ((0.20, 0.90), (0.0, 0.30), (0.0, 0.30)),
    (10, 13): ((0.0, 0.60), (0.0, 0.50), (0.0, 0.50)),
    (11, 14): ((0.80, 2.00), (0.0, 0.50), (0.0, 0.50)),
    (12, 15): ((0.50, 1.60), (0.0, 0.40), (0.0, 0.40)),
}


def _profile_from_table(action: str, table: dict, bone_count: int) -> AngleRangeProfile:
    lo = np.zeros((bone_count, 3))
    hi = np.zeros((bone_count, 3))
    for bones, axis_ranges in table.items():
        for b in bones:
            for axis, (a_lo, a_hi) in enumerate(axis_ranges):
                lo[b, axis] = a_lo
                hi[b, axis] = a_hi
    return AngleRangeProfile(action, lo, hi)


def authored_profiles(topo: SkeletonTopology) -> dict[str, AngleRangeProfile]:
    """The built-in pseudo-action range tables (17-joint layout only)."""
    if topo.bone_count != 16:
        raise ConfigError(
            "authored pseudo-actions are defined for the 16-bone default "
            f"topology, got {topo.bone_count} bones"
        )
    return {
        "stroll": _profile_from_table("stroll", _STROLL, topo.bone_count),
        "floorwork": _profile_from_table("floorwork", _FLOORWORK, topo.bone_count),
    }


def body_templates(count: int = 10) -> BoneLengthTemplates:
    """Evenly spaced whole-body scales of the base limb lengths."""
    if count < 1:
        raise ConfigError(f"template count must be >= 1, got {count}")
    scales = np.linspace(0.9, 1.1, count)
    return BoneLengthTemplates(
        tuple("body" for _ in range(count)),
        scales[:, None] * _BASE_LENGTHS_MM[None, :],
    )


@dataclass(frozen=True)
class SyntheticGtSpec:
    frames: int = 2000
    mix: tuple[tuple[str, float], ...] = (("stroll", 0.5), ("floorwork", 0.5))
    rng_seed: int = 0
    keyframes_per_sequence: int = 4
    inter_frames: int = 10
    template_count: int = 10

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")
        total = sum(p for _, p in self.mix)
        if not self.mix or abs(total - 1.0) > 1e-9 or any(p <= 0 for _, p in self.mix):
            raise ConfigError(
                f"mix proportions must be positive and sum to 1, got {self.mix}"
            )


def make_gt_dataset(
    spec: SyntheticGtSpec, cam: CameraIntrinsics, topo: SkeletonTopology
) -> Dataset:
    """Exactly spec.frames records with the requested per-action counts.

    Sequences run the usual keyframe machinery; the last sequence of an
    action is truncated to hit the count. Records carry no angle
    matrices, like any external ground truth.
    """
    profiles = authored_profiles(topo)
    templates = body_templates(spec.template_count)
    per_seq = spec.keyframes_per_sequence * spec.inter_frames

    counts: list[tuple[str, int]] = []
    assigned = 0
    for i, (action, prop) in enumerate(spec.mix):
        if action not in profiles:
            raise ConfigError(
                f"unknown pseudo-action {action!r}; available: {sorted(profiles)}"
            )
        n = int(np.floor(prop * spec.frames))
        if i == len(spec.mix) - 1:
            n = spec.frames - assigned
        counts.append((action, n))
        assigned += n
    if any(n < 1 for _, n in counts):
        raise ConfigError(f"mix {spec.mix} leaves an action with zero frames")

    cfg = GeneratorConfig(
        keyframes_per_sequence=spec.keyframes_per_sequence,
        inter_frames=spec.inter_frames,
        rng_seed=spec.rng_seed,
    )

    records: list[DatasetRecord] = []
    seq_id = 0
    for action, n_frames in counts:
        remaining = n_frames
        while remaining > 0:
            seq = generate_sequence(profiles[action], templates, cfg, topo, seq_id)
            take = min(remaining, per_seq)
            poses2d = project(seq.joints3d[:take], cam)
            for f in range(take):
                records.append(
                    DatasetRecord(
                        frame_id=f,
                        sequence_id=seq_id,
                        action=action,
                        joints3d=seq.joints3d[f],
                        joints2d=poses2d[f],
                        bone_lengths=seq.bone_lengths,
                        source="gt",
                        angles=None,
                    )
                )
            remaining -= take
            seq_id += 1
    return Dataset(topology_digest=topo.digest(), records=records)


def skewed_spec(
    frames: int, major_share: float, rng_seed: int, major: str = "stroll"
) -> SyntheticGtSpec:
    """Convenience spec with one dominant action."""
    if not (0.0 < major_share < 1.0):
        raise ConfigError(f"major_share must be in (0, 1), got {major_share}")
    minor = "floorwork" if major == "stroll" else "stroll"
    return SyntheticGtSpec(
        frames=frames,
        mix=((major, major_share), (minor, 1.0 - major_share)),
        rng_seed=rng_seed,
    )
