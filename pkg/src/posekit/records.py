"""Artifact file formats.

Datasets are JSON-Lines: a header object naming the schema and the
topology digest, then one record per frame. Ranges, histograms,
checkpoints, and eval reports are single JSON documents, also carrying
the digest. All writes are atomic (temp file in the target directory,
then rename) and deterministic: keys are sorted, floats use repr, and
no timestamps or absolute paths are embedded.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraIntrinsics, project
from .errors import DataError, TopologyMismatchError
from .estimator import EstimatorModel, param_order
from .posegen import AngleRangeProfile, BoneLengthTemplates
from .propensity import HistogramMap
from .skeleton import SkeletonTopology

DATASET_SCHEMA = "pose-dataset/v1"
RANGES_SCHEMA = "pose-ranges/v1"
HISTOGRAM_SCHEMA = "pose-histogram/v1"
CHECKPOINT_SCHEMA = "pose-estimator/v1"
REPORT_SCHEMA = "pose-eval/v1"
SOURCES = ("gt", "generated")


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partial artifact."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class DatasetRecord:
    frame_id: int
    sequence_id: int
    action: str
    joints3d: np.ndarray  # (J, 3) absolute mm
    joints2d: np.ndarray  # (J, 2) px
    bone_lengths: np.ndarray  # (M,)
    source: str  # "gt" | "generated"
    angles: np.ndarray | None = None  # (M, 3), generated frames only

    def to_json_dict(self) -> dict:
        doc = {
            "frame_id": int(self.frame_id),
            "sequence_id": int(self.sequence_id),
            "action": self.action,
            "joints3d": self.joints3d.tolist(),
            "joints2d": self.joints2d.tolist(),
            "bone_lengths": self.bone_lengths.tolist(),
            "source": self.source,
        }
        if self.angles is not None:
            doc["angles"] = self.angles.tolist()
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DatasetRecord":
        try:
            source = doc["source"]
            if source not in SOURCES:
                raise ValueError(f"unknown source {source!r}")
            angles = doc.get("angles")
            return cls(
                frame_id=int(doc["frame_id"]),
                sequence_id=int(doc["sequence_id"]),
                action=str(doc["action"]),
                joints3d=np.asarray(doc["joints3d"], dtype=np.float64),
                joints2d=np.asarray(doc["joints2d"], dtype=np.float64),
                bone_lengths=np.asarray(doc["bone_lengths"], dtype=np.float64),
                source=str(source),
                angles=None if angles is None else np.asarray(angles, dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed dataset record: {exc}") from exc


@dataclass
class Dataset:
    topology_digest: str
    records: list[DatasetRecord] = field(default_factory=list)

    def joints2d_array(self) -> np.ndarray:
        return np.stack([r.joints2d for r in self.records])

    def joints3d_array(self) -> np.ndarray:
        return np.stack([r.joints3d for r in self.records])

    def actions(self) -> list[str]:
        return [r.action for r in self.records]


def write_dataset(path: str, dataset: Dataset) -> None:
    if not dataset.records:
        raise DataError("refusing to write an empty dataset")
    j = dataset.records[0].joints3d.shape[0]
    header = {
        "schema": DATASET_SCHEMA,
        "topology_digest": dataset.topology_digest,
        "joint_count": j,
        "record_count": len(dataset.records),
    }
    lines = [_dumps(header)]
    lines.extend(_dumps(r.to_json_dict()) for r in dataset.records)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_dataset(path: str, expected_digest: str | None = None) -> Dataset:
    """Parse a JSONL dataset; malformed lines are reported by number."""
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")
    records: list[DatasetRecord] = []
    header = None
    with open(path, "r") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed JSON at line {lineno}: {exc}") from exc
            if lineno == 1:
                if not isinstance(doc, dict) or doc.get("schema") != DATASET_SCHEMA:
                    raise DataError(
                        f"{path}: line 1 is not a {DATASET_SCHEMA} header"
                    )
                header = doc
                continue
            try:
                records.append(DatasetRecord.from_json_dict(doc))
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    if header is None:
        raise DataError(f"{path}: empty dataset file")
    if not records:
        raise DataError(f"{path}: dataset has a header but no records")
    digest = str(header.get("topology_digest", ""))
    if expected_digest is not None and digest != expected_digest:
        raise TopologyMismatchError(
            f"{path}: topology digest {digest[:12]}... does not match "
            f"expected {expected_digest[:12]}..."
        )
    return Dataset(topology_digest=digest, records=records)


def write_topology(path: str, topo: SkeletonTopology) -> None:
    atomic_write_text(path, _dumps(topo.to_json_dict()) + "\n")


def read_topology(path: str) -> SkeletonTopology:
    if not os.path.exists(path):
        raise DataError(f"topology file not found: {path}")
    with open(path, "r") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed topology JSON: {exc}") from exc
    try:
        return SkeletonTopology.from_json_dict(doc)
    except (DataError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_ranges(
    path: str,
    profiles: list[AngleRangeProfile],
    templates: BoneLengthTemplates,
    topo: SkeletonTopology,
    ik_frame: str,
    padding: float,
) -> None:
    doc = {
        "schema": RANGES_SCHEMA,
        "topology_digest": topo.digest(),
        "ik_frame": ik_frame,
        "range_padding": padding,
        "profiles": [
            {
                "action": p.action,
                "lo": p.lo.tolist(),
                "hi": p.hi.tolist(),
                "seed_count": p.seed_count,
            }
            for p in profiles
        ],
        "templates": {
            "actions": list(templates.actions),
            "lengths": templates.lengths.tolist(),
        },
    }
    atomic_write_text(path, _dumps(doc) + "\n")


def read_ranges(
    path: str, expected_digest: str | None = None
) -> tuple[list[AngleRangeProfile], BoneLengthTemplates, str, float]:
    if not os.path.exists(path):
        raise DataError(f"ranges file not found: {path}")
    with open(path, "r") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed ranges JSON: {exc}") from exc
    if doc.get("schema") != RANGES_SCHEMA:
        raise DataError(f"{path}: not a {RANGES_SCHEMA} document")
    digest = str(doc.get("topology_digest", ""))
    if expected_digest is not None and digest != expected_digest:
        raise TopologyMismatchError(
            f"{path}: topology digest {digest[:12]}... does not match "
            f"expected {expected_digest[:12]}..."
        )
    try:
        profiles = [
            AngleRangeProfile(
                action=str(p["action"]),
                lo=np.asarray(p["lo"], dtype=np.float64),
                hi=np.asarray(p["hi"], dtype=np.float64),
                seed_count=int(p.get("seed_count", 0)),
            )
            for p in doc["profiles"]
        ]
        templates = BoneLengthTemplates(
            tuple(str(a) for a in doc["templates"]["actions"]),
            np.asarray(doc["templates"]["lengths"], dtype=np.float64),
        )
        return profiles, templates, str(doc["ik_frame"]), float(doc["range_padding"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed ranges document: {exc}") from exc


def write_histogram(
    path: str,
    hist: HistogramMap,
    topo_digest: str,
    provenance: dict,
) -> None:
    doc = {"schema": HISTOGRAM_SCHEMA, "topology_digest": topo_digest}
    doc.update(hist.to_json_dict())
    doc["provenance"] = provenance
    atomic_write_text(path, _dumps(doc) + "\n")


def read_histogram(
    path: str, expected_digest: str | None = None
) -> tuple[HistogramMap, dict]:
    if not os.path.exists(path):
        raise DataError(f"histogram file not found: {path}")
    with open(path, "r") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed histogram JSON: {exc}") from exc
    if doc.get("schema") != HISTOGRAM_SCHEMA:
        raise DataError(f"{path}: not a {HISTOGRAM_SCHEMA} document")
    digest = str(doc.get("topology_digest", ""))
    if expected_digest is not None and digest != expected_digest:
        raise TopologyMismatchError(
            f"{path}: topology digest {digest[:12]}... does not match "
            f"expected {expected_digest[:12]}..."
        )
    return HistogramMap.from_json_dict(doc), dict(doc.get("provenance", {}))


def write_checkpoint(
    path: str,
    model: EstimatorModel,
    topo_digest: str,
    cam: CameraIntrinsics,
    input_scale: float,
) -> None:
    doc = {
        "schema": CHECKPOINT_SCHEMA,
        "topology_digest": topo_digest,
        "arch": {
            "joint_count": model.joint_count,
            "hidden": model.hidden,
            "blocks": model.blocks,
            "activation": model.activation,
        },
        "normalization": {"camera": cam.to_json_dict(), "input_scale": input_scale},
        "param_order": model.param_order,
        "params": {
            name: {
                "shape": list(model.params[name].shape),
                "data": model.params[name].reshape(-1).tolist(),
            }
            for name in model.param_order
        },
    }
    atomic_write_text(path, _dumps(doc) + "\n")


def read_checkpoint(
    path: str, expected_digest: str | None = None
) -> tuple[EstimatorModel, CameraIntrinsics, float, str]:
    if not os.path.exists(path):
        raise DataError(f"checkpoint file not found: {path}")
    with open(path, "r") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed checkpoint JSON: {exc}") from exc
    if doc.get("schema") != CHECKPOINT_SCHEMA:
        raise DataError(f"{path}: not a {CHECKPOINT_SCHEMA} document")
    digest = str(doc.get("topology_digest", ""))
    if expected_digest is not None and digest != expected_digest:
        raise TopologyMismatchError(
            f"{path}: topology digest {digest[:12]}... does not match "
            f"expected {expected_digest[:12]}..."
        )
    try:
        arch = doc["arch"]
        names = param_order(int(arch["blocks"]))
        if doc["param_order"] != names:
            raise ValueError("parameter order does not match the architecture")
        params = {}
        for name in names:
            entry = doc["params"][name]
            params[name] = np.asarray(entry["data"], dtype=np.float64).reshape(
                entry["shape"]
            )
        model = EstimatorModel(
            joint_count=int(arch["joint_count"]),
            hidden=int(arch["hidden"]),
            blocks=int(arch["blocks"]),
            activation=str(arch["activation"]),
            params=params,
        )
        cam = CameraIntrinsics.from_json_dict(doc["normalization"]["camera"])
        scale = float(doc["normalization"]["input_scale"])
        return model, cam, scale, digest
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed checkpoint: {exc}") from exc


def write_trace_csv(path: str, trace: list[dict]) -> None:
    lines = ["epoch,loss_pose,loss_co,loss_total"]
    for row in trace:
        lines.append(
            f"{row['epoch']},{row['loss_pose']!r},{row['loss_co']!r},{row['loss_total']!r}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_report(path: str, report_doc: dict, topo_digest: str) -> None:
    doc = {"schema": REPORT_SCHEMA, "topology_digest": topo_digest}
    doc.update(report_doc)
    atomic_write_text(path, _dumps(doc) + "\n")


def dataset_from_sequences(sequences, cam, topo) -> Dataset:
    """Flatten generated sequences into records with projected 2D."""
    records: list[DatasetRecord] = []
    for seq in sequences:
        poses2d = project(seq.joints3d, cam)
        for f in range(seq.joints3d.shape[0]):
            records.append(
                DatasetRecord(
                    frame_id=f,
                    sequence_id=seq.sequence_id,
                    action=seq.action,
                    joints3d=seq.joints3d[f],
                    joints2d=poses2d[f],
                    bone_lengths=seq.bone_lengths,
                    source="generated",
                    angles=seq.angles[f],
                )
            )
    return Dataset(topology_digest=topo.digest(), records=records)
