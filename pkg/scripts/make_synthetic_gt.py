#!/usr/bin/env python
"""Write a synthetic ground-truth dataset for the CLI walkthrough.

Frames come from the built-in pseudo-action angle profiles, so the file
plays the role an external motion-capture export would: absolute 3D
joints, projected 2D joints, bone lengths, and no angle matrices.
"""

import argparse

from posekit.camera import CameraIntrinsics
from posekit.records import write_dataset
from posekit.skeleton import default_topology
from posekit.synthgt import SyntheticGtSpec, make_gt_dataset, skewed_spec


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="dataset JSONL output")
    ap.add_argument("--frames", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument(
        "--major-share", type=float, default=None,
        help="if set, skew the action mix instead of the default 50/50",
    )
    args = ap.parse_args()

    if args.major_share is None:
        spec = SyntheticGtSpec(frames=args.frames, rng_seed=args.seed)
    else:
        spec = skewed_spec(args.frames, args.major_share, args.seed)
    topo = default_topology()
    dataset = make_gt_dataset(spec, CameraIntrinsics(), topo)
    write_dataset(args.out, dataset)
    mix = ", ".join(f"{action} {share:g}" for action, share in spec.mix)
    print(f"wrote {len(dataset.records)} frames ({mix}) to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
