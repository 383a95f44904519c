"""Synthetic multi-symbol sequence corpora and the on-disk feature format.

Each vocabulary class owns a fixed bank of smooth per-dimension
sinusoids; a sample concatenates the patterns of its symbol sequence
with jittered durations, amplitudes, and phases, then the whole corpus
is normalized to zero mean and unit variance per feature dimension.
The task is deliberately desk-scale learnable while leaving alignment
(variable durations, 1..7 symbols) nontrivial.

The container format is one file per sample:

    8-byte magic | uint32 little-endian header length | header JSON | payload

with the payload stored as little-endian float32, row-major (T, D).
Header keys: version, t, d, sample_id, labels, normalized.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .rng import Prng

MAGIC = b"SFUSEFC1"
CONTAINER_VERSION = 1


@dataclass(frozen=True)
class SyntheticTaskSpec:
    vocab_size: int = 11
    feature_dim: int = 39
    symbol_duration: tuple = (30, 57)  # inclusive frame range per symbol
    symbols_per_seq: tuple = (1, 7)  # inclusive symbol-count range
    train_samples: int = 2000
    test_samples: int = 400
    jitter: float = 0.1
    seed: int = 0

    def validate(self):
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.symbol_duration[0] < 3:
            raise ConfigError("symbol durations must be >= 3 frames")
        if self.symbol_duration[0] > self.symbol_duration[1]:
            raise ConfigError("symbol_duration range is inverted")
        if self.symbols_per_seq[0] < 1 or self.symbols_per_seq[0] > self.symbols_per_seq[1]:
            raise ConfigError("symbols_per_seq range is invalid")
        if self.train_samples < 1 or self.test_samples < 1:
            raise ConfigError("sample counts must be >= 1")


def task_spec_to_dict(spec: SyntheticTaskSpec) -> dict:
    return {
        "vocab_size": spec.vocab_size,
        "feature_dim": spec.feature_dim,
        "symbol_duration": list(spec.symbol_duration),
        "symbols_per_seq": list(spec.symbols_per_seq),
        "train_samples": spec.train_samples,
        "test_samples": spec.test_samples,
        "jitter": spec.jitter,
        "seed": spec.seed,
    }


def task_spec_from_dict(d: dict) -> SyntheticTaskSpec:
    try:
        spec = SyntheticTaskSpec(
            vocab_size=int(d.get("vocab_size", 11)),
            feature_dim=int(d.get("feature_dim", 39)),
            symbol_duration=tuple(d.get("symbol_duration", (30, 57))),
            symbols_per_seq=tuple(d.get("symbols_per_seq", (1, 7))),
            train_samples=int(d.get("train_samples", 2000)),
            test_samples=int(d.get("test_samples", 400)),
            jitter=float(d.get("jitter", 0.1)),
            seed=int(d.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed corpus spec: {exc}") from exc
    spec.validate()
    return spec


@dataclass
class Sample:
    features: np.ndarray  # (T, D) float32
    labels: list
    sample_id: str


@dataclass
class Corpus:
    spec: SyntheticTaskSpec
    train: list
    test: list
    mean: np.ndarray
    std: np.ndarray

    def split(self, name: str):
        if name not in ("train", "test"):
            raise ConfigError(f"unknown split {name!r}")
        return self.train if name == "train" else self.test


def _signature_bank(spec: SyntheticTaskSpec, root: Prng):
    """Per-class (amplitude, cycles, phase) triples over the feature dims."""
    bank = {}
    for cls in range(1, spec.vocab_size + 1):
        stream = root.split("signature", cls)
        amp = stream.uniform(0.5, 1.5, spec.feature_dim)
        cycles = stream.uniform(0.5, 2.5, spec.feature_dim)
        phase = stream.uniform(0.0, 2.0 * np.pi, spec.feature_dim)
        bank[cls] = (amp, cycles, phase)
    return bank


def _render_sample(spec, bank, stream, sample_id):
    lo_n, hi_n = spec.symbols_per_seq
    n_symbols = lo_n + int(stream.random() * (hi_n - lo_n + 1))
    lo_d, hi_d = spec.symbol_duration
    chunks = []
    labels = []
    for _ in range(n_symbols):
        cls = 1 + int(stream.random() * spec.vocab_size)
        dur = lo_d + int(stream.random() * (hi_d - lo_d + 1))
        amp, cycles, phase = bank[cls]
        amp_jit = 1.0 + spec.jitter * stream.normal(spec.feature_dim)
        phase_jit = spec.jitter * stream.normal(spec.feature_dim)
        tau = np.arange(dur)[:, None] / dur
        frames = (amp * amp_jit) * np.sin(
            2.0 * np.pi * cycles * tau + phase + phase_jit
        )
        chunks.append(frames)
        labels.append(cls)
    return Sample(
        features=np.concatenate(chunks, axis=0).astype(np.float64),
        labels=labels,
        sample_id=sample_id,
    )


def generate_corpus(spec: SyntheticTaskSpec, prng: Prng | None = None) -> Corpus:
    """Deterministic train/test corpus; splits draw from disjoint streams."""
    spec.validate()
    root = prng if prng is not None else Prng(spec.seed)
    bank = _signature_bank(spec, root)
    splits = {}
    for name, count in (("train", spec.train_samples), ("test", spec.test_samples)):
        samples = []
        for i in range(count):
            stream = root.split("corpus", name, i)
            samples.append(_render_sample(spec, bank, stream, f"{name}_{i:05d}"))
        splits[name] = samples
    all_frames = np.concatenate(
        [s.features for s in splits["train"] + splits["test"]], axis=0
    )
    mean = all_frames.mean(axis=0)
    std = all_frames.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    for samples in splits.values():
        for s in samples:
            s.features = ((s.features - mean) / std).astype(np.float32)
    return Corpus(spec=spec, train=splits["train"], test=splits["test"],
                  mean=mean, std=std)


# -- container i/o -------------------------------------------------------------


def write_container(path, sample: Sample, *, normalized: bool = True):
    header = {
        "version": CONTAINER_VERSION,
        "t": int(sample.features.shape[0]),
        "d": int(sample.features.shape[1]),
        "sample_id": sample.sample_id,
        "labels": [int(v) for v in sample.labels],
        "normalized": bool(normalized),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(sample.features, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def read_container(path) -> Sample:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"{path}: unreadable header: {exc}") from exc
        if header.get("version") != CONTAINER_VERSION:
            raise DataFormatError(
                f"{path}: unsupported container version {header.get('version')}"
            )
        t, d = int(header["t"]), int(header["d"])
        payload = fh.read()
    if len(payload) != 4 * t * d:
        raise DataFormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {4 * t * d}"
        )
    features = np.frombuffer(payload, dtype="<f4").reshape(t, d).astype(np.float32)
    return Sample(features=features, labels=list(header["labels"]),
                  sample_id=header["sample_id"])


def write_corpus(corpus: Corpus, outdir) -> Path:
    """Write one container per sample plus the manifest; returns its path."""
    outdir = Path(outdir)
    manifest = {
        "version": 1,
        "spec": task_spec_to_dict(corpus.spec),
        "normalization": {
            "mean": [float(v) for v in corpus.mean],
            "std": [float(v) for v in corpus.std],
        },
        "splits": {},
    }
    for name in ("train", "test"):
        (outdir / name).mkdir(parents=True, exist_ok=True)
        files = []
        for sample in corpus.split(name):
            rel = f"{name}/{sample.sample_id}.sfc"
            write_container(outdir / rel, sample)
            files.append(rel)
        manifest["splits"][name] = files
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_corpus(manifest_path) -> Corpus:
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if manifest.get("version") != 1:
        raise DataFormatError(f"unsupported manifest version {manifest.get('version')}")
    spec = task_spec_from_dict(manifest["spec"])
    root = manifest_path.parent
    splits = {
        name: [read_container(root / rel) for rel in manifest["splits"][name]]
        for name in ("train", "test")
    }
    return Corpus(
        spec=spec,
        train=splits["train"],
        test=splits["test"],
        mean=np.asarray(manifest["normalization"]["mean"]),
        std=np.asarray(manifest["normalization"]["std"]),
    )
