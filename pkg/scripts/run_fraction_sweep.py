#!/usr/bin/env python
"""Sweep the share of the ground-truth pool used during training.

Trains one estimator per (seed, fraction) cell on the skewed benchmark
and reports mean balanced-test MPJPE per fraction.
"""

import argparse

from posekit.experiments import ExperimentSpec, build_benchmark, run_fraction_sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fraction_sweep", help="output directory")
    ap.add_argument("--seeds", type=int, nargs="+", default=[101, 102, 103, 104, 105])
    ap.add_argument(
        "--fractions", type=float, nargs="+", default=[0.03, 0.10, 0.25, 0.50]
    )
    args = ap.parse_args()

    spec = ExperimentSpec(
        name="fraction-sweep",
        seeds=tuple(args.seeds),
        gt_fractions=tuple(args.fractions),
    )
    benchmarks = {s: build_benchmark(s, spec.benchmark) for s in spec.seeds}
    summary = run_fraction_sweep(spec, out_dir=args.out, benchmarks=benchmarks)
    for f, m, s in zip(
        summary["fractions"], summary["mean_mpjpe"], summary["sd_mpjpe"]
    ):
        print(f"fraction {f:.2f}: {m:.2f} +- {s:.2f} mm")
    print(f"trend tau {summary['trend_tau']:.2f} (negative: more labels help)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
