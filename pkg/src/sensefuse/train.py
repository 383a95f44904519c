"""Deterministic training: ADAM on mean CTC loss with per-sensor noise.

Every sensor of every sample receives a freshly drawn random-walk noise
signal each epoch, from a stream keyed by (seed, epoch, sample, sensor),
so two runs with the same seed produce bit-identical loss traces and
checkpoints. Early stopping watches the held-out split's loss under a
fixed validation corruption (drawn once, not per epoch) and restores the
best parameters on exit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .corpus import Sample
from .ctc import ctc_feasible, ctc_loss_batch, greedy_decode
from .errors import ConfigError
from .model import FusionModel
from .noise import WalkConfig, apply_noise, walk_schedule
from .optim import AdamState, adam_step, clip_global_norm
from .rng import Prng


@dataclass
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 16
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    val_fraction: float = 0.1
    noise: WalkConfig | None = field(default_factory=WalkConfig)
    noise_per_sensor: bool = True  # False: all sensors share one corruption
    eval_cadence: int = 1  # epochs between validation decodes

    def validate(self):
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if not 0 <= self.patience < self.max_epochs:
            raise ConfigError("patience must satisfy 0 <= patience < max_epochs")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list
    best_epoch: int
    excluded: int


def _corrupt_batch(model, samples, noise_cfg, stream_for, dtype):
    """Padded per-sensor input arrays plus lengths for one batch."""
    n_sensors = len(model.branches)
    lengths = [s.features.shape[0] for s in samples]
    T = max(lengths)
    B = len(samples)
    D = samples[0].features.shape[1]
    inputs = [np.zeros((T, B, D), dtype=dtype) for _ in range(n_sensors)]
    for b, sample in enumerate(samples):
        clean = sample.features
        for k in range(n_sensors):
            if noise_cfg is None:
                inputs[k][: lengths[b], b] = clean
            else:
                stream = stream_for(sample, k)
                sched = walk_schedule(stream, noise_cfg, lengths[b])
                inputs[k][: lengths[b], b] = apply_noise(stream, clean, sched)
    return inputs, lengths


def _batches(order, size):
    for start in range(0, len(order), size):
        yield order[start : start + size]


def _epoch_pass(model, samples, config, stream_for, train: bool, adam=None):
    dtype = model.spec.np_dtype()
    total_nll = 0.0
    refs, hyps = [], []
    for batch_idx in _batches(np.arange(len(samples)), config.batch_size):
        batch = [samples[i] for i in batch_idx]
        inputs, lengths = _corrupt_batch(
            model, batch, config.noise, stream_for, dtype
        )
        result = model.forward(inputs, lengths)
        loss, dlogits = ctc_loss_batch(
            result.logits, lengths, [s.labels for s in batch]
        )
        total_nll += loss * len(batch)
        if train:
            model.zero_grads()
            model.backward(dlogits)
            clip_global_norm(model.grads(), config.clip_norm)
            adam_step(model.params(), model.grads(), adam)
        else:
            for b, sample in enumerate(batch):
                refs.append(sample.labels)
                hyps.append(greedy_decode(result.logits[: lengths[b], b]))
    mean_nll = total_nll / len(samples)
    if train:
        return mean_nll, None
    errors = sum(list(r) != list(h) for r, h in zip(refs, hyps))
    return mean_nll, 100.0 * errors / len(refs)


def train(model: FusionModel, train_samples, config: TrainConfig) -> TrainResult:
    """Fit the model; returns the best checkpoint and the epoch log."""
    config.validate()
    root = Prng(config.seed)
    usable = []
    excluded = 0
    for s in train_samples:
        if ctc_feasible(s.features.shape[0], s.labels):
            usable.append(s)
        else:
            excluded += 1
    if not usable:
        raise ConfigError("no feasible training samples")

    # deterministic validation carve-out
    perm = np.argsort(root.split("valsplit").random(len(usable)), kind="stable")
    n_val = max(1, int(round(config.val_fraction * len(usable))))
    val_idx = set(int(i) for i in perm[:n_val])
    val_set = [usable[i] for i in sorted(val_idx)]
    fit_set = [usable[i] for i in range(len(usable)) if i not in val_idx]
    if not fit_set:
        raise ConfigError("validation split consumed every sample")

    sample_uid = {id(s): i for i, s in enumerate(usable)}
    adam = AdamState.for_params(
        model.params(),
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
    )

    def val_stream(sample, sensor):
        # fixed corruption: comparable validation loss across epochs
        return root.split("valnoise", sample_uid[id(sample)], sensor)

    log = []
    best_nll = np.inf
    best_epoch = -1
    best_params = None
    stall = 0
    for epoch in range(config.max_epochs):
        order = np.argsort(
            root.split("order", epoch).random(len(fit_set)), kind="stable"
        )
        shuffled = [fit_set[int(i)] for i in order]

        def train_stream(sample, sensor, _epoch=epoch):
            k = sensor if config.noise_per_sensor else 0
            return root.split("noise", _epoch, sample_uid[id(sample)], k)

        train_nll, _ = _epoch_pass(
            model, shuffled, config, train_stream, train=True, adam=adam
        )
        entry = {"epoch": epoch, "train_nll": float(train_nll)}
        val_nll, val_ser = _epoch_pass(
            model, val_set, config, val_stream, train=False
        )
        entry["val_nll"] = float(val_nll)
        if epoch % config.eval_cadence == 0:
            entry["val_ser"] = float(val_ser)
        log.append(entry)
        if val_nll < best_nll:
            best_nll = val_nll
            best_epoch = epoch
            best_params = {
                k: np.array(v, copy=True) for k, v in model.params().items()
            }
            stall = 0
        else:
            stall += 1
            if stall > config.patience:
                break
    if best_params is not None:
        for name, value in model.params().items():
            value[...] = best_params[name]
    ckpt = Checkpoint.from_model(
        model,
        metrics={
            "best_epoch": best_epoch,
            "best_val_nll": float(best_nll),
            "epochs_run": len(log),
            "excluded_infeasible": excluded,
        },
    )
    return TrainResult(checkpoint=ckpt, log=log, best_epoch=best_epoch,
                       excluded=excluded)
