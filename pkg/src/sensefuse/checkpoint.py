"""Named-tensor checkpoints with lossless subtree grafting.

A checkpoint file is an 8-byte magic, a uint32 little-endian manifest
length, the manifest JSON, and a binary blob holding every tensor
little-endian in manifest order. The manifest records the model spec,
per-tensor shape/dtype/offset, optional metrics, a config hash, and the
provenance of each subtree (which matters after grafting). Writes are
atomic (temp file + rename).

Grafting splices the ``sensor.*`` subtrees of one checkpoint onto the
``classifier.*`` subtree of another without touching a single value;
the only compatibility requirement is that the donor front end merges
to the feature width the recipient classifier was trained on.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, GraftError
from .model import FusionModel, ModelSpec, build_model, spec_from_dict, spec_to_dict
from .rng import Prng

MAGIC = b"SFUSECK1"
CHECKPOINT_VERSION = 1

_DTYPES = {"float32": "<f4", "float64": "<f8"}


@dataclass
class Checkpoint:
    spec: ModelSpec
    tensors: dict
    metrics: dict = field(default_factory=dict)
    config_hash: str = ""
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: FusionModel, *, metrics=None, config_hash="",
                   provenance=None):
        tensors = {k: np.array(v, copy=True) for k, v in model.params().items()}
        return cls(
            spec=model.spec,
            tensors=tensors,
            metrics=dict(metrics or {}),
            config_hash=config_hash,
            provenance=dict(provenance or {}),
        )

    def build_model(self) -> FusionModel:
        model = build_model(self.spec, Prng(0))
        model.load_params(self.tensors)
        return model


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    names = sorted(ckpt.tensors)
    index = []
    offset = 0
    blobs = []
    for name in names:
        tensor = ckpt.tensors[name]
        dtype = str(tensor.dtype)
        if dtype not in _DTYPES:
            raise DataFormatError(f"unsupported tensor dtype {dtype} for {name}")
        raw = np.ascontiguousarray(tensor, dtype=_DTYPES[dtype]).tobytes()
        index.append(
            {
                "name": name,
                "shape": list(tensor.shape),
                "dtype": dtype,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "version": CHECKPOINT_VERSION,
        "model_spec": spec_to_dict(ckpt.spec),
        "tensors": index,
        "metrics": ckpt.metrics,
        "config_hash": ckpt.config_hash,
        "provenance": ckpt.provenance,
    }
    head = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(head)))
            fh.write(head)
            for raw in blobs:
                fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataFormatError(f"{path}: bad checkpoint magic {magic!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        try:
            manifest = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"{path}: unreadable manifest: {exc}") from exc
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise DataFormatError(
                f"{path}: unsupported checkpoint version {manifest.get('version')}"
            )
        blob = fh.read()
    tensors = {}
    for entry in manifest["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(blob):
            raise DataFormatError(f"{path}: truncated blob at tensor {entry['name']}")
        raw = blob[start : start + nbytes]
        arr = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(entry["dtype"])
    return Checkpoint(
        spec=spec_from_dict(manifest["model_spec"]),
        tensors=tensors,
        metrics=manifest.get("metrics", {}),
        config_hash=manifest.get("config_hash", ""),
        provenance=manifest.get("provenance", {}),
    )


def graft(front: Checkpoint, body: Checkpoint) -> Checkpoint:
    """Front sensors + attention onto the body's classifier, unchanged.

    The body must be a single-sensor model (its classifier consumes the
    sensor feature width directly); the front's merged width must equal
    it. No tensor is modified; provenance records the source of every
    subtree.
    """
    front_dim = front.spec.merged_dim()
    body_dim = body.spec.merged_dim()
    if front_dim != body_dim:
        raise GraftError(
            f"front merges to {front_dim} features but the body classifier "
            f"expects {body_dim}"
        )
    spec = ModelSpec(
        architecture=front.spec.architecture,
        sensors=front.spec.sensors,
        classifier=body.spec.classifier,
        num_classes=body.spec.num_classes,
        share_transform=front.spec.share_transform,
        share_attention=front.spec.share_attention,
        dtype=front.spec.dtype,
    )
    spec.validate()
    tensors = {}
    for name, value in front.tensors.items():
        if name.startswith("sensor."):
            tensors[name] = np.array(value, copy=True)
    for name, value in body.tensors.items():
        if name.startswith("classifier."):
            tensors[name] = np.array(value, copy=True)
    provenance = {
        "sensor.*": front.provenance.get("self", front.config_hash or "front"),
        "classifier.*": body.provenance.get("self", body.config_hash or "body"),
    }
    return Checkpoint(
        spec=spec,
        tensors=tensors,
        metrics={},
        config_hash="",
        provenance=provenance,
    )
