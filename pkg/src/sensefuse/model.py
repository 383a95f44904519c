"""Multi-sensor sequence models: attention fusion, concatenation, single.

An attention-fusion model gives every sensor its own transformation
layer and a small recurrent attention head producing one scalar score
per frame. Scores are softmaxed across sensors frame by frame, and the
transformed features are merged as the attention-weighted sum before a
shared recurrent classifier. The concatenation baseline stacks the
transformed features instead; the single baseline is a plain
sensor-to-classifier pipeline.

Parameters live in a flat named tree (``FusionModel.params``) with the
canonical layout ``sensor.<i>.transform.*``, ``sensor.<i>.attention.*``,
``classifier.*`` so sub-trees can be saved, loaded, and grafted by name
prefix. Weight sharing stores shared tensors once, under sensor 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conv import CHANNELS, KERNEL, ConvStack, conv_output_dim
from .errors import ConfigError, DimensionError
from .layers import (
    AttentionHead,
    Dense,
    GruStack,
    softmax,
    softmax_backward,
)
from .noise import NoiseSchedule
from .rng import Prng

ARCHITECTURES = ("attention", "concat", "single")


@dataclass(frozen=True)
class SensorSpec:
    """One input stream and its per-sensor layers."""

    modality: str = "feature"  # feature | image
    feature_dim: int = 0
    image_shape: tuple = ()
    transform: str = "identity"  # identity | dense | cnn
    transform_units: int = 0  # dense output width
    attention_units: int = 0  # 0 = no attention head

    def validate(self):
        if self.modality == "feature":
            if self.feature_dim < 1:
                raise ConfigError("feature sensor needs feature_dim >= 1")
            if self.transform == "cnn":
                raise ConfigError("cnn transform requires the image modality")
            if self.transform == "dense" and self.transform_units < 1:
                raise ConfigError("dense transform needs transform_units >= 1")
        elif self.modality == "image":
            if len(self.image_shape) != 3:
                raise ConfigError("image sensor needs image_shape (H, W, C)")
            if self.transform != "cnn":
                raise ConfigError("image sensors require the cnn transform")
            conv_output_dim(self.image_shape)
        else:
            raise ConfigError(f"unknown modality {self.modality!r}")
        if self.transform not in ("identity", "dense", "cnn"):
            raise ConfigError(f"unknown transform {self.transform!r}")

    def transformed_dim(self) -> int:
        if self.transform == "identity":
            return self.feature_dim
        if self.transform == "dense":
            return self.transform_units
        return conv_output_dim(self.image_shape)


@dataclass(frozen=True)
class ClassifierSpec:
    hidden: tuple = (100,)
    bidirectional: bool = False

    def validate(self):
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError("classifier needs positive hidden sizes")


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    sensors: tuple
    classifier: ClassifierSpec
    num_classes: int  # vocabulary size + 1 blank
    share_transform: bool = False
    share_attention: bool = False
    dtype: str = "float32"

    def validate(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if self.num_classes < 2:
            raise ConfigError(
                "num_classes must cover the blank plus a non-empty vocabulary"
            )
        n = len(self.sensors)
        for s in self.sensors:
            s.validate()
        if self.architecture == "single":
            if n != 1:
                raise ConfigError("single architecture takes exactly one sensor")
            if self.sensors[0].attention_units:
                raise ConfigError("single architecture has no attention head")
        elif self.architecture == "concat":
            if n < 2:
                raise ConfigError("concat architecture needs >= 2 sensors")
            if any(s.attention_units for s in self.sensors):
                raise ConfigError("concat architecture has no attention heads")
        else:
            if n < 2:
                raise ConfigError("attention architecture needs >= 2 sensors")
            if any(s.attention_units < 1 for s in self.sensors):
                raise ConfigError("every sensor needs an attention head")
        dims = {s.transformed_dim() for s in self.sensors}
        if self.architecture != "concat" and len(dims) != 1:
            raise ConfigError(
                f"sensors must produce one merged dimension, got {sorted(dims)}"
            )
        if (self.share_transform or self.share_attention) and len(
            {(s.transform, s.transformed_dim(), s.attention_units, s.feature_dim,
              s.image_shape) for s in self.sensors}
        ) > 1:
            raise ConfigError("weight sharing requires identical sensor specs")
        self.classifier.validate()

    def merged_dim(self) -> int:
        dims = [s.transformed_dim() for s in self.sensors]
        return sum(dims) if self.architecture == "concat" else dims[0]

    def np_dtype(self):
        return np.dtype(self.dtype).type


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "architecture": spec.architecture,
        "sensors": [
            {
                "modality": s.modality,
                "feature_dim": s.feature_dim,
                "image_shape": list(s.image_shape),
                "transform": s.transform,
                "transform_units": s.transform_units,
                "attention_units": s.attention_units,
            }
            for s in spec.sensors
        ],
        "classifier": {
            "hidden": list(spec.classifier.hidden),
            "bidirectional": spec.classifier.bidirectional,
        },
        "num_classes": spec.num_classes,
        "share_transform": spec.share_transform,
        "share_attention": spec.share_attention,
        "dtype": spec.dtype,
    }


def spec_from_dict(d: dict) -> ModelSpec:
    try:
        sensors = tuple(
            SensorSpec(
                modality=s.get("modality", "feature"),
                feature_dim=int(s.get("feature_dim", 0)),
                image_shape=tuple(s.get("image_shape", ())),
                transform=s.get("transform", "identity"),
                transform_units=int(s.get("transform_units", 0)),
                attention_units=int(s.get("attention_units", 0)),
            )
            for s in d["sensors"]
        )
        spec = ModelSpec(
            architecture=d["architecture"],
            sensors=sensors,
            classifier=ClassifierSpec(
                hidden=tuple(d["classifier"]["hidden"]),
                bidirectional=bool(d["classifier"].get("bidirectional", False)),
            ),
            num_classes=int(d["num_classes"]),
            share_transform=bool(d.get("share_transform", False)),
            share_attention=bool(d.get("share_attention", False)),
            dtype=d.get("dtype", "float32"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed model spec: {exc}") from exc
    spec.validate()
    return spec


# -- parameter accounting ----------------------------------------------------


def _gru_count(d_in: int, hidden: int) -> int:
    return 3 * (d_in * hidden + hidden * hidden + hidden)


def _dense_count(d_in: int, d_out: int) -> int:
    return d_in * d_out + d_out


def _transform_count(sensor: SensorSpec) -> int:
    if sensor.transform == "identity":
        return 0
    if sensor.transform == "dense":
        return _dense_count(sensor.feature_dim, sensor.transform_units)
    count = 0
    c_in = sensor.image_shape[2]
    for c_out in CHANNELS:
        count += _dense_count(KERNEL * KERNEL * c_in, c_out)
        c_in = c_out
    return count


def _attention_count(sensor: SensorSpec) -> int:
    if not sensor.attention_units:
        return 0
    d = sensor.transformed_dim()
    return _gru_count(d, sensor.attention_units) + _dense_count(
        sensor.attention_units, 1
    )


def _classifier_count(spec: ModelSpec) -> int:
    d = spec.merged_dim()
    count = 0
    for h in spec.classifier.hidden:
        layer = _gru_count(d, h)
        if spec.classifier.bidirectional:
            count += 2 * layer
            d = 2 * h
        else:
            count += layer
            d = h
    return count + _dense_count(d, spec.num_classes)


def count_params(spec: ModelSpec) -> int:
    """Exact trainable-parameter count, a pure function of the spec."""
    spec.validate()
    transforms = spec.sensors[:1] if spec.share_transform else spec.sensors
    attentions = spec.sensors[:1] if spec.share_attention else spec.sensors
    return (
        sum(_transform_count(s) for s in transforms)
        + sum(_attention_count(s) for s in attentions)
        + _classifier_count(spec)
    )


# -- model -------------------------------------------------------------------


@dataclass
class ForwardResult:
    logits: np.ndarray  # (T, B, classes)
    attention: np.ndarray | None  # (T, B, N)
    scores: np.ndarray | None  # (T, B, N)
    merged: np.ndarray  # (T, B, merged_dim)


@dataclass
class AttentionTrace:
    """Frame-aligned noise levels and attention weights for one sample."""

    sigma: np.ndarray  # (T, N)
    attention: np.ndarray  # (T, N)

    def rows(self):
        for t in range(self.sigma.shape[0]):
            yield (t, *self.sigma[t], *self.attention[t])

    def to_csv(self, path):
        n = self.sigma.shape[1]
        header = (
            "frame,"
            + ",".join(f"sigma_{i + 1}" for i in range(n))
            + ","
            + ",".join(f"attn_{i + 1}" for i in range(n))
        )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in self.rows():
                fh.write(",".join(repr(float(v)) if isinstance(v, float)
                                  else str(v) for v in row) + "\n")


class _SensorBranch:
    def __init__(self, sensor: SensorSpec, prng: Prng, dtype):
        self.spec = sensor
        if sensor.transform == "dense":
            self.transform = Dense(
                sensor.feature_dim,
                sensor.transform_units,
                "tanh",
                prng=prng.split("transform"),
                dtype=dtype,
            )
        elif sensor.transform == "cnn":
            self.transform = ConvStack(
                sensor.image_shape, prng=prng.split("transform"), dtype=dtype
            )
        else:
            self.transform = None
        if sensor.attention_units:
            self.attention = AttentionHead(
                sensor.transformed_dim(),
                sensor.attention_units,
                prng=prng.split("attention"),
                dtype=dtype,
            )
        else:
            self.attention = None

    @classmethod
    def share_from(cls, donor: "_SensorBranch", share_transform, share_attention,
                   sensor, prng, dtype):
        branch = cls.__new__(cls)
        branch.spec = sensor
        if donor.transform is not None and share_transform:
            branch.transform = type(donor.transform).share_from(donor.transform)
        elif sensor.transform == "dense":
            branch.transform = Dense(
                sensor.feature_dim,
                sensor.transform_units,
                "tanh",
                prng=prng.split("transform"),
                dtype=dtype,
            )
        elif sensor.transform == "cnn":
            branch.transform = ConvStack(
                sensor.image_shape, prng=prng.split("transform"), dtype=dtype
            )
        else:
            branch.transform = None
        if donor.attention is not None and share_attention:
            branch.attention = AttentionHead.share_from(donor.attention)
        elif sensor.attention_units:
            branch.attention = AttentionHead(
                sensor.transformed_dim(),
                sensor.attention_units,
                prng=prng.split("attention"),
                dtype=dtype,
            )
        else:
            branch.attention = None
        return branch


class FusionModel:
    """Built model: branches plus classifier, with a named parameter tree."""

    def __init__(self, spec: ModelSpec, prng: Prng | None = None):
        spec.validate()
        self.spec = spec
        dtype = spec.np_dtype()
        if prng is None:
            prng = Prng(0)
        self.branches = []
        for i, sensor in enumerate(spec.sensors):
            if i > 0 and (spec.share_transform or spec.share_attention):
                branch = _SensorBranch.share_from(
                    self.branches[0],
                    spec.share_transform,
                    spec.share_attention,
                    sensor,
                    prng.split("sensor", i),
                    dtype,
                )
            else:
                branch = _SensorBranch(sensor, prng.split("sensor", i), dtype)
            self.branches.append(branch)
        cls_prng = prng.split("classifier")
        self.classifier = GruStack(
            spec.merged_dim(),
            spec.classifier.hidden,
            bidirectional=spec.classifier.bidirectional,
            prng=cls_prng.split("rnn"),
            dtype=dtype,
        )
        self.output = Dense(
            self.classifier.d_out,
            spec.num_classes,
            "identity",
            prng=cls_prng.split("out"),
            dtype=dtype,
        )

    # -- parameter tree ------------------------------------------------------

    def _layer_tree(self):
        """(path, layer-or-param-dict) pairs; shared layers listed once."""
        entries = []
        seen = set()
        for i, branch in enumerate(self.branches):
            if branch.transform is not None:
                key = id(branch.transform.params)
                if key not in seen:
                    seen.add(key)
                    entries.append((f"sensor.{i}.transform", branch.transform))
            if branch.attention is not None:
                key = id(branch.attention.gru.params)
                if key not in seen:
                    seen.add(key)
                    entries.append((f"sensor.{i}.attention.gru", branch.attention.gru))
                    entries.append(
                        (f"sensor.{i}.attention.score", branch.attention.score)
                    )
        for j, layer in enumerate(self.classifier.layers):
            if self.spec.classifier.bidirectional:
                entries.append((f"classifier.rnn{j}.fwd", layer.fwd))
                entries.append((f"classifier.rnn{j}.bwd", layer.bwd))
            else:
                entries.append((f"classifier.rnn{j}", layer))
        entries.append(("classifier.out", self.output))
        return entries

    def params(self) -> dict:
        tree = {}
        for prefix, layer in self._layer_tree():
            for name, value in layer.params.items():
                tree[f"{prefix}.{name}"] = value
        return tree

    def grads(self) -> dict:
        tree = {}
        for prefix, layer in self._layer_tree():
            for name, value in layer.grads.items():
                tree[f"{prefix}.{name}"] = value
        return tree

    def zero_grads(self):
        for g in self.grads().values():
            g[...] = 0.0

    def load_params(self, tensors: dict):
        """Copy named tensors into the tree in place (aliases stay intact)."""
        own = self.params()
        missing = set(own) - set(tensors)
        if missing:
            raise DimensionError(f"checkpoint missing tensors: {sorted(missing)[:4]}")
        for name, target in own.items():
            src = tensors[name]
            if tuple(src.shape) != tuple(target.shape):
                raise DimensionError(
                    f"tensor {name} shape {src.shape} != expected {target.shape}"
                )
            target[...] = src.astype(target.dtype)

    # -- forward / backward ----------------------------------------------------

    def forward(self, inputs, lengths=None) -> ForwardResult:
        if len(inputs) != len(self.branches):
            raise DimensionError(
                f"model has {len(self.branches)} sensors, got {len(inputs)} inputs"
            )
        shapes = {(x.shape[0], x.shape[1]) for x in inputs}
        if len(shapes) != 1:
            raise DimensionError(f"sensor inputs disagree on (T, B): {shapes}")
        dtype = self.spec.np_dtype()
        inputs = [np.ascontiguousarray(x, dtype=dtype) for x in inputs]
        transformed = []
        for branch, x in zip(self.branches, inputs):
            t = branch.transform.forward(x, lengths) if branch.transform else x
            transformed.append(t)
        attn = scores = None
        if self.spec.architecture == "attention":
            scores = np.stack(
                [
                    branch.attention.forward(t, lengths)
                    for branch, t in zip(self.branches, transformed)
                ],
                axis=2,
            )  # (T, B, N)
            attn = softmax(scores, axis=2)
            merged = np.zeros_like(transformed[0])
            for i, t in enumerate(transformed):
                merged += attn[:, :, i : i + 1] * t
        elif self.spec.architecture == "concat":
            merged = np.concatenate(transformed, axis=2)
        else:
            merged = transformed[0]
        hidden = self.classifier.forward(merged, lengths)
        logits = self.output.forward(hidden, lengths)
        self._cache = (transformed, attn, lengths)
        return ForwardResult(logits=logits, attention=attn, scores=scores,
                             merged=merged)

    def backward(self, dlogits):
        transformed, attn, lengths = self._cache
        dmerged = self.classifier.backward(self.output.backward(dlogits))
        if self.spec.architecture == "attention":
            dattn = np.stack(
                [np.sum(dmerged * t, axis=2) for t in transformed], axis=2
            )
            dscores = softmax_backward(attn, dattn, axis=2)
            for i, (branch, t) in enumerate(zip(self.branches, transformed)):
                dt = attn[:, :, i : i + 1] * dmerged
                dt = dt + branch.attention.backward(
                    np.ascontiguousarray(dscores[:, :, i])
                )
                if branch.transform is not None:
                    branch.transform.backward(dt)
        elif self.spec.architecture == "concat":
            offset = 0
            for branch, t in zip(self.branches, transformed):
                width = t.shape[2]
                if branch.transform is not None:
                    branch.transform.backward(dmerged[:, :, offset : offset + width])
                offset += width
        else:
            branch = self.branches[0]
            if branch.transform is not None:
                branch.transform.backward(dmerged)


def build_model(spec: ModelSpec, prng: Prng | None = None) -> FusionModel:
    return FusionModel(spec, prng)


def trace_attention(model: FusionModel, features, schedules, prng: Prng):
    """Corrupt one clean sample per-sensor and record noise vs attention.

    features: (T, D) clean frames, fed to every sensor; schedules: one
    NoiseSchedule per sensor. Returns (AttentionTrace, ForwardResult).
    """
    from .noise import apply_noise  # local import avoids a cycle at module load

    if model.spec.architecture != "attention":
        raise ConfigError("attention traces need the attention architecture")
    n = len(model.branches)
    if len(schedules) != n:
        raise DimensionError(f"need {n} schedules, got {len(schedules)}")
    T = features.shape[0]
    for sched in schedules:
        if len(sched.sigma) != T:
            raise DimensionError("schedule length must match the sample")
    inputs = []
    for k, sched in enumerate(schedules):
        noisy = apply_noise(prng.split("trace", k), features, sched)
        inputs.append(noisy[:, None, :])
    result = model.forward(inputs, lengths=[T])
    sigma = np.stack([s.sigma for s in schedules], axis=1)
    trace = AttentionTrace(sigma=sigma, attention=result.attention[:, 0, :])
    return trace, result


def make_schedule(sigma) -> NoiseSchedule:
    """Wrap a raw level vector (mainly for tests and tracing helpers)."""
    return NoiseSchedule(sigma=np.asarray(sigma, dtype=np.float64))
