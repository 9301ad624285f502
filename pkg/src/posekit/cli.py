"""Command-line pipeline.

Verbs: extract-ranges, generate, histogram, train, eval, plot-dist.
Every verb accepts --config (JSON pipeline config), --seed (overrides
the config seed), and --out. Exit codes: 0 ok, 2 usage or config
error, 3 data error, 4 numerical failure. The POSEGU_THREADS
environment variable caps generation parallelism; results are
identical at any setting.

All artifacts embed the topology digest and are written atomically;
running any verb twice with the same inputs, config, and seed produces
byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import records
from .config import PipelineConfig, apply_seed, load_config
from .errors import ConfigError, DataError, NumericalError
from .estimator import init_model, normalization_scale, predict_batch, train
from .metrics import evaluate
from .posegen import extract_ranges, extract_templates, generate_dataset, subsample_seeds
from .propensity import build_gt_histogram, build_histogram
from .skeleton import SkeletonTopology, default_topology

THREADS_ENV = "POSEGU_THREADS"

# seed stream ids, disjoint from the generator's per-sequence streams
_STREAM_SEED_SUBSAMPLE = 1001
_STREAM_HISTOGRAM = 1002


def _threads_from_env() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value


def _resolve_topology(cfg: PipelineConfig) -> SkeletonTopology:
    if cfg.topology_path is None:
        return default_topology()
    return records.read_topology(cfg.topology_path)


def _group_by_action(dataset: records.Dataset) -> dict[str, np.ndarray]:
    groups: dict[str, list[np.ndarray]] = {}
    for rec in dataset.records:
        groups.setdefault(rec.action, []).append(rec.joints3d)
    return {a: np.stack(v) for a, v in groups.items()}


def cmd_extract_ranges(args, cfg: PipelineConfig, topo: SkeletonTopology) -> int:
    dataset = records.read_dataset(args.seeds, expected_digest=topo.digest())
    groups = _group_by_action(dataset)
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, _STREAM_SEED_SUBSAMPLE))
    )
    picked = subsample_seeds(groups, cfg.generator.seed_samples_per_action, rng)
    profiles = extract_ranges(
        picked, topo, cfg.generator.range_padding, cfg.generator.ik_frame
    )
    templates = extract_templates(picked, topo)
    records.write_ranges(
        args.out, profiles, templates, topo,
        cfg.generator.ik_frame, cfg.generator.range_padding,
    )
    for p in profiles:
        total = groups[p.action].shape[0]
        print(f"action {p.action}: {p.seed_count} seeds (of {total})")
    print(f"wrote {args.out}")
    return 0


def cmd_generate(args, cfg: PipelineConfig, topo: SkeletonTopology) -> int:
    profiles, templates, ik_frame, padding = records.read_ranges(
        args.ranges, expected_digest=topo.digest()
    )
    workers = _threads_from_env()
    sequences = generate_dataset(profiles, templates, cfg.generator, topo, workers)
    dataset = records.dataset_from_sequences(sequences, cfg.camera, topo)
    records.write_dataset(args.out, dataset)
    print(
        f"generated {len(sequences)} sequences "
        f"({len(dataset.records)} frames) into {args.out}"
    )
    return 0


def cmd_histogram(args, cfg: PipelineConfig, topo: SkeletonTopology) -> int:
    dataset = records.read_dataset(args.data, expected_digest=topo.digest())
    poses2d = dataset.joints2d_array()
    fraction = args.fraction if args.fraction is not None else cfg.histogram.gt_fraction
    edges = None
    if args.edges_from is not None:
        other, _ = records.read_histogram(args.edges_from, expected_digest=topo.digest())
        if other.bin_count != cfg.histogram.bin_count:
            raise ConfigError(
                f"--edges-from histogram has {other.bin_count} bins, "
                f"config wants {cfg.histogram.bin_count}"
            )
        edges = (other.edges_u, other.edges_v)
    if fraction >= 1.0:
        hist = build_histogram(
            poses2d, cfg.histogram.bin_count, cfg.histogram.epsilon, edges
        )
    else:
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, _STREAM_HISTOGRAM))
        )
        hist = build_gt_histogram(
            poses2d, fraction, rng, cfg.histogram.bin_count, cfg.histogram.epsilon, edges
        )
    provenance = {
        "source_sha256": records.file_sha256(args.data),
        "fraction": float(fraction),
        "seed": cfg.seed,
    }
    records.write_histogram(args.out, hist, topo.digest(), provenance)
    print(
        f"histogram over {hist.sample_count} poses "
        f"({hist.bin_count}x{hist.bin_count} bins per joint) -> {args.out}"
    )
    return 0


def _pairs_from_dataset(dataset: records.Dataset, topo: SkeletonTopology):
    p2 = dataset.joints2d_array()
    p3 = dataset.joints3d_array()
    rel = p3 - p3[:, topo.root_index : topo.root_index + 1, :]
    return p2, rel


def cmd_train(args, cfg: PipelineConfig, topo: SkeletonTopology) -> int:
    digest = topo.digest()
    gen_ds = records.read_dataset(args.generated, expected_digest=digest)
    gt_ds = records.read_dataset(args.gt, expected_digest=digest)
    hist_gt, _ = records.read_histogram(args.hist_gt, expected_digest=digest)
    hist_gen, _ = records.read_histogram(args.hist_gen, expected_digest=digest)

    gen2d, gen3d = _pairs_from_dataset(gen_ds, topo)
    gt2d, gt3d = _pairs_from_dataset(gt_ds, topo)

    model = init_model(
        topo.joint_count,
        hidden=cfg.model.hidden,
        blocks=cfg.model.blocks,
        activation=cfg.model.activation,
        seed=cfg.seed,
    )
    scale = normalization_scale(cfg.camera, cfg.model.input_scale)
    result = train(
        model, gen2d, gen3d, gt2d, gt3d, hist_gt, hist_gen,
        cfg.camera, cfg.train, cfg.crm, input_scale=scale,
    )
    records.write_checkpoint(args.out, result.model, digest, cfg.camera, scale)
    trace_path = os.path.splitext(args.out)[0] + ".trace.csv"
    records.write_trace_csv(trace_path, result.trace)
    if result.trace:
        last = result.trace[-1]
        print(
            f"epoch {last['epoch']}: pose {last['loss_pose']:.3f} "
            f"co {last['loss_co']:.3f} total {last['loss_total']:.3f}"
        )
    print(f"wrote {args.out} and {trace_path}")
    return 0


def cmd_eval(args, cfg: PipelineConfig, topo: SkeletonTopology) -> int:
    model, cam, scale, ckpt_digest = records.read_checkpoint(
        args.checkpoint, expected_digest=topo.digest()
    )
    dataset = records.read_dataset(args.data, expected_digest=ckpt_digest)
    poses2d, targets = _pairs_from_dataset(dataset, topo)
    predictions = predict_batch(model, poses2d, cam, scale)
    report = evaluate(
        predictions, targets, dataset.actions(), root_index=topo.root_index
    )
    print(report.table())
    if args.out is not None:
        records.write_report(args.out, report.to_json_dict(), topo.digest())
        print(f"wrote {args.out}")
    return 0


def cmd_plot_dist(args, cfg: PipelineConfig, topo: SkeletonTopology) -> int:
    digest = topo.digest()
    ds_a = records.read_dataset(args.dataset_a, expected_digest=digest)
    ds_b = records.read_dataset(args.dataset_b, expected_digest=digest)
    if not (0 <= args.joint < topo.joint_count):
        raise ConfigError(
            f"joint index {args.joint} out of range for {topo.joint_count} joints"
        )
    if args.bins < 1:
        raise ConfigError(f"--bins must be >= 1, got {args.bins}")
    pts_a = ds_a.joints3d_array()[:, args.joint, :]
    pts_b = ds_b.joints3d_array()[:, args.joint, :]

    def points_csv(points):
        lines = ["x_mm,y_mm,z_mm"]
        lines.extend(f"{p[0]!r},{p[1]!r},{p[2]!r}" for p in points)
        return "\n".join(lines) + "\n"

    records.atomic_write_text(f"{args.out}.points.a.csv", points_csv(pts_a))
    records.atomic_write_text(f"{args.out}.points.b.csv", points_csv(pts_b))

    lines = ["dataset,axis,bin_low,bin_high,count"]
    for axis, axis_name in enumerate("xyz"):
        lo = min(pts_a[:, axis].min(), pts_b[:, axis].min())
        hi = max(pts_a[:, axis].max(), pts_b[:, axis].max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, args.bins + 1)
        for name, pts in (("a", pts_a), ("b", pts_b)):
            counts, _ = np.histogram(pts[:, axis], bins=edges)
            for b in range(args.bins):
                lines.append(
                    f"{name},{axis_name},{edges[b]!r},{edges[b + 1]!r},{int(counts[b])}"
                )
    records.atomic_write_text(f"{args.out}.marginals.csv", "\n".join(lines) + "\n")
    print(
        f"joint {args.joint} ({topo.joint_names[args.joint]}): "
        f"{pts_a.shape[0]} vs {pts_b.shape[0]} points -> {args.out}.*"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posekit",
        description="synthetic pose generation and reweighted 2D-to-3D lifting",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="pipeline config JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "extract-ranges", parents=[common],
        help="per-action angle ranges and length templates from seed poses",
    )
    p.add_argument("seeds", help="ground-truth JSONL dataset of seed poses")
    p.add_argument("--out", required=True, help="ranges JSON output")
    p.set_defaults(func=cmd_extract_ranges)

    p = sub.add_parser(
        "generate", parents=[common], help="synthesize a pose dataset from ranges"
    )
    p.add_argument("ranges", help="ranges JSON from extract-ranges")
    p.add_argument("--out", required=True, help="dataset JSONL output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser(
        "histogram", parents=[common], help="per-joint 2D histograms of a dataset"
    )
    p.add_argument("data", help="dataset JSONL")
    p.add_argument(
        "--fraction", type=float, default=None,
        help="subsample share (default: config histogram.gt_fraction; "
        "use 1.0 for generated data)",
    )
    p.add_argument(
        "--edges-from", default=None,
        help="reuse bin edges from an existing histogram file",
    )
    p.add_argument("--out", required=True, help="histogram JSON output")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser(
        "train", parents=[common], help="train the lifting estimator"
    )
    p.add_argument("generated", help="generated dataset JSONL")
    p.add_argument("--gt", required=True, help="ground-truth dataset JSONL")
    p.add_argument("--hist-gt", required=True, help="ground-truth histogram JSON")
    p.add_argument("--hist-gen", required=True, help="generated histogram JSON")
    p.add_argument("--out", required=True, help="checkpoint JSON output")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "eval", parents=[common], help="evaluate a checkpoint on a dataset"
    )
    p.add_argument("checkpoint", help="checkpoint JSON")
    p.add_argument("--data", required=True, help="evaluation dataset JSONL")
    p.add_argument("--out", default=None, help="optional report JSON output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "plot-dist", parents=[common],
        help="point clouds and marginal histograms of one joint in two datasets",
    )
    p.add_argument("dataset_a", help="first dataset JSONL")
    p.add_argument("dataset_b", help="second dataset JSONL")
    p.add_argument("--joint", type=int, required=True, help="joint index")
    p.add_argument("--bins", type=int, default=40, help="marginal histogram bins")
    p.add_argument("--out", required=True, help="output file prefix")
    p.set_defaults(func=cmd_plot_dist)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_seed(cfg, args.seed)
        topo = _resolve_topology(cfg)
        return args.func(args, cfg, topo)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
