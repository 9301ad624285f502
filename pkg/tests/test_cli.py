import json
import os

import numpy as np
import pytest

from posekit.cli import main
from posekit.records import (
    file_sha256,
    read_checkpoint,
    read_dataset,
    read_histogram,
    write_dataset,
)
from posekit.skeleton import default_topology
from posekit.synthgt import SyntheticGtSpec, make_gt_dataset
from posekit.camera import CameraIntrinsics


def run(argv, capsys=None):
    code = main(argv)
    return code


SMALL_CFG = {
    "seed": 11,
    "generator": {
        "keyframes_per_sequence": 2,
        "inter_frames": 3,
        "sequences_per_action": 4,
        "seed_samples_per_action": 10,
    },
    "histogram": {"bin_count": 6},
    "model": {"hidden": 16, "blocks": 1},
    "train": {"epochs": 2, "batch_size": 32},
}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One end-to-end CLI run whose artifacts the tests below inspect."""
    root = tmp_path_factory.mktemp("cli")
    topo = default_topology()
    cam = CameraIntrinsics()

    cfg_path = str(root / "cfg.json")
    with open(cfg_path, "w") as handle:
        json.dump(SMALL_CFG, handle)

    gt_path = str(root / "gt.jsonl")
    spec = SyntheticGtSpec(
        frames=120, rng_seed=77, keyframes_per_sequence=2, inter_frames=5
    )
    write_dataset(gt_path, make_gt_dataset(spec, cam, topo))

    paths = {
        "root": root,
        "cfg": cfg_path,
        "gt": gt_path,
        "ranges": str(root / "ranges.json"),
        "gen": str(root / "gen.jsonl"),
        "hist_gt": str(root / "hist_gt.json"),
        "hist_gen": str(root / "hist_gen.json"),
        "ckpt": str(root / "model.json"),
        "report": str(root / "report.json"),
    }
    assert main(["extract-ranges", gt_path, "--config", cfg_path,
                 "--out", paths["ranges"]]) == 0
    assert main(["generate", paths["ranges"], "--config", cfg_path,
                 "--out", paths["gen"]]) == 0
    assert main(["histogram", gt_path, "--config", cfg_path,
                 "--out", paths["hist_gt"]]) == 0
    assert main(["histogram", paths["gen"], "--config", cfg_path,
                 "--fraction", "1.0", "--edges-from", paths["hist_gt"],
                 "--out", paths["hist_gen"]]) == 0
    assert main(["train", paths["gen"], "--config", cfg_path,
                 "--gt", gt_path, "--hist-gt", paths["hist_gt"],
                 "--hist-gen", paths["hist_gen"], "--out", paths["ckpt"]]) == 0
    assert main(["eval", paths["ckpt"], "--config", cfg_path,
                 "--data", gt_path, "--out", paths["report"]]) == 0
    return paths


def test_pipeline_artifacts_exist(pipeline):
    for key in ("ranges", "gen", "hist_gt", "hist_gen", "ckpt", "report"):
        assert os.path.exists(pipeline[key])
    assert os.path.exists(str(pipeline["root"] / "model.trace.csv"))


def test_generate_frame_count(pipeline):
    # 2 actions x 4 sequences x (2 keyframes x 3 inter) = 48 frames
    ds = read_dataset(pipeline["gen"])
    assert len(ds.records) == 48
    assert all(r.source == "generated" for r in ds.records)
    assert all(r.angles is not None for r in ds.records)
    assert {r.action for r in ds.records} == {"stroll", "floorwork"}


def test_generate_is_byte_deterministic(pipeline):
    out2 = str(pipeline["root"] / "gen2.jsonl")
    assert main(["generate", pipeline["ranges"], "--config", pipeline["cfg"],
                 "--out", out2]) == 0
    assert file_sha256(out2) == file_sha256(pipeline["gen"])


def test_generate_threads_do_not_change_bytes(pipeline, monkeypatch):
    monkeypatch.setenv("POSEGU_THREADS", "4")
    out3 = str(pipeline["root"] / "gen3.jsonl")
    assert main(["generate", pipeline["ranges"], "--config", pipeline["cfg"],
                 "--out", out3]) == 0
    assert file_sha256(out3) == file_sha256(pipeline["gen"])


def test_invalid_threads_env(pipeline, monkeypatch):
    monkeypatch.setenv("POSEGU_THREADS", "banana")
    assert main(["generate", pipeline["ranges"], "--config", pipeline["cfg"],
                 "--out", str(pipeline["root"] / "x.jsonl")]) == 2
    monkeypatch.setenv("POSEGU_THREADS", "0")
    assert main(["generate", pipeline["ranges"], "--config", pipeline["cfg"],
                 "--out", str(pipeline["root"] / "x.jsonl")]) == 2


def test_seed_override_changes_output(pipeline):
    out_a = str(pipeline["root"] / "gen_seed5.jsonl")
    out_b = str(pipeline["root"] / "gen_seed6.jsonl")
    assert main(["generate", pipeline["ranges"], "--config", pipeline["cfg"],
                 "--seed", "5", "--out", out_a]) == 0
    assert main(["generate", pipeline["ranges"], "--config", pipeline["cfg"],
                 "--seed", "6", "--out", out_b]) == 0
    assert file_sha256(out_a) != file_sha256(out_b)


def test_histogram_fraction_subsampling(pipeline):
    # 120 gt poses at the default 0.25 fraction -> ceil = 30
    hist, provenance = read_histogram(pipeline["hist_gt"])
    assert hist.sample_count == 30
    assert provenance["fraction"] == 0.25
    hist_gen, _ = read_histogram(pipeline["hist_gen"])
    assert hist_gen.sample_count == 48  # fraction 1.0 keeps everything


def test_histogram_shared_edges(pipeline):
    h_gt, _ = read_histogram(pipeline["hist_gt"])
    h_gen, _ = read_histogram(pipeline["hist_gen"])
    assert np.array_equal(h_gt.edges_u, h_gen.edges_u)
    assert np.array_equal(h_gt.edges_v, h_gen.edges_v)


def test_histogram_determinism(pipeline):
    out2 = str(pipeline["root"] / "hist_gt2.json")
    assert main(["histogram", pipeline["gt"], "--config", pipeline["cfg"],
                 "--out", out2]) == 0
    assert file_sha256(out2) == file_sha256(pipeline["hist_gt"])


def test_train_writes_trace(pipeline):
    trace = open(str(pipeline["root"] / "model.trace.csv")).read().splitlines()
    assert trace[0] == "epoch,loss_pose,loss_co,loss_total"
    assert len(trace) == 1 + SMALL_CFG["train"]["epochs"]


def test_train_checkpoint_readable(pipeline):
    model, cam, scale, digest = read_checkpoint(pipeline["ckpt"])
    assert model.hidden == 16
    assert model.blocks == 1
    assert digest == default_topology().digest()
    assert scale == pytest.approx(1000.0 / (2 * 1150.0))


def test_train_is_byte_deterministic(pipeline):
    out2 = str(pipeline["root"] / "model2.json")
    assert main(["train", pipeline["gen"], "--config", pipeline["cfg"],
                 "--gt", pipeline["gt"], "--hist-gt", pipeline["hist_gt"],
                 "--hist-gen", pipeline["hist_gen"], "--out", out2]) == 0
    assert file_sha256(out2) == file_sha256(pipeline["ckpt"])


def test_eval_report_content(pipeline):
    doc = json.load(open(pipeline["report"]))
    assert doc["schema"] == "pose-eval/v1"
    assert doc["sample_count"] == 120
    assert doc["p_mpjpe_mm"] <= doc["mpjpe_mm"] + 1e-9
    assert set(doc["per_action"]) == {"stroll", "floorwork"}


def test_eval_self_supervised_zero_error(pipeline, tmp_path):
    """A dataset whose 3D poses are the checkpoint's own predictions
    evaluates to literally zero error."""
    model, cam, scale, digest = read_checkpoint(pipeline["ckpt"])
    ds = read_dataset(pipeline["gt"])
    from posekit.estimator import predict_batch

    poses2d = ds.joints2d_array()
    preds = predict_batch(model, poses2d, cam, scale)
    for rec, p in zip(ds.records, preds):
        rec.joints3d = p
    loop_path = str(tmp_path / "loop.jsonl")
    write_dataset(loop_path, ds)
    report_path = str(tmp_path / "loop_report.json")
    assert main(["eval", pipeline["ckpt"], "--config", pipeline["cfg"],
                 "--data", loop_path, "--out", report_path]) == 0
    doc = json.load(open(report_path))
    assert doc["mpjpe_mm"] == 0.0
    assert doc["pck_percent"] == 100.0
    assert doc["auc_percent"] == 100.0


def test_train_epochs_zero_writes_initial_model(pipeline, tmp_path):
    cfg = dict(SMALL_CFG)
    cfg["train"] = {"epochs": 0}
    cfg_path = str(tmp_path / "cfg0.json")
    json.dump(cfg, open(cfg_path, "w"))
    out = str(tmp_path / "init.json")
    assert main(["train", pipeline["gen"], "--config", cfg_path,
                 "--gt", pipeline["gt"], "--hist-gt", pipeline["hist_gt"],
                 "--hist-gen", pipeline["hist_gen"], "--out", out]) == 0
    model, _, _, _ = read_checkpoint(out)
    trace = open(str(tmp_path / "init.trace.csv")).read().splitlines()
    assert trace == ["epoch,loss_pose,loss_co,loss_total"]
    # matches a fresh init with the same seed
    from posekit.estimator import init_model

    fresh = init_model(default_topology().joint_count, hidden=16, blocks=1,
                       seed=SMALL_CFG["seed"])
    for key in fresh.params:
        assert np.array_equal(model.params[key], fresh.params[key])


def test_plot_dist_outputs(pipeline):
    prefix = str(pipeline["root"] / "dist")
    assert main(["plot-dist", pipeline["gt"], pipeline["gen"],
                 "--config", pipeline["cfg"], "--joint", "3",
                 "--bins", "10", "--out", prefix]) == 0
    pts_a = open(prefix + ".points.a.csv").read().splitlines()
    pts_b = open(prefix + ".points.b.csv").read().splitlines()
    assert pts_a[0] == "x_mm,y_mm,z_mm"
    assert len(pts_a) == 1 + 120
    assert len(pts_b) == 1 + 48
    marginals = open(prefix + ".marginals.csv").read().splitlines()
    assert marginals[0] == "dataset,axis,bin_low,bin_high,count"
    # per dataset and axis, counts sum to the record count
    sums = {}
    for line in marginals[1:]:
        name, axis, lo, hi, count = line.split(",")
        sums[(name, axis)] = sums.get((name, axis), 0) + int(count)
    assert all(v == 120 for (n, _), v in sums.items() if n == "a")
    assert all(v == 48 for (n, _), v in sums.items() if n == "b")


def test_plot_dist_identical_inputs(pipeline):
    p1 = str(pipeline["root"] / "same1")
    p2 = str(pipeline["root"] / "same2")
    for prefix in (p1, p2):
        assert main(["plot-dist", pipeline["gt"], pipeline["gt"],
                     "--config", pipeline["cfg"], "--joint", "0",
                     "--out", prefix]) == 0
    assert file_sha256(p1 + ".points.a.csv") == file_sha256(p2 + ".points.a.csv")
    a = open(p1 + ".points.a.csv").read()
    b = open(p1 + ".points.b.csv").read()
    assert a == b


def test_plot_dist_joint_out_of_range(pipeline):
    joints = default_topology().joint_count
    assert main(["plot-dist", pipeline["gt"], pipeline["gen"],
                 "--config", pipeline["cfg"], "--joint", str(joints),
                 "--out", str(pipeline["root"] / "bad")]) == 2


def test_missing_input_file_is_data_error(pipeline):
    assert main(["generate", str(pipeline["root"] / "nope.json"),
                 "--config", pipeline["cfg"],
                 "--out", str(pipeline["root"] / "y.jsonl")]) == 3


def test_bad_config_is_usage_error(pipeline, tmp_path):
    cfg_path = str(tmp_path / "bad.json")
    json.dump({"generator": {"keyframes_per_sequence": 1}}, open(cfg_path, "w"))
    assert main(["extract-ranges", pipeline["gt"], "--config", cfg_path,
                 "--out", str(tmp_path / "r.json")]) == 2
    json.dump({"not_a_section": {}}, open(cfg_path, "w"))
    assert main(["extract-ranges", pipeline["gt"], "--config", cfg_path,
                 "--out", str(tmp_path / "r.json")]) == 2


def test_unknown_command_exits_two(pipeline):
    with pytest.raises(SystemExit) as exc:
        main(["transmogrify"])
    assert exc.value.code == 2


def test_digest_mismatch_between_artifacts(pipeline, tmp_path):
    """An artifact from a different topology is rejected."""
    other_topo_path = str(tmp_path / "other_topo.json")
    topo = default_topology()
    doc = topo.to_json_dict()
    doc["joints"] = list(doc["joints"])
    doc["joints"][-1] = "antenna"
    json.dump(doc, open(other_topo_path, "w"))
    cfg = dict(SMALL_CFG)
    cfg["topology_path"] = other_topo_path
    cfg_path = str(tmp_path / "cfg_other.json")
    json.dump(cfg, open(cfg_path, "w"))
    assert main(["generate", pipeline["ranges"], "--config", cfg_path,
                 "--out", str(tmp_path / "z.jsonl")]) == 3
