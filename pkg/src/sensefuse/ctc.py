"""Alignment-free sequence loss and best-path decoding.

The loss marginalizes over every blank-extended frame alignment of the
label sequence with a log-space dynamic program; gradients come from
the state posteriors in closed form. Class 0 is the blank everywhere in
the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, EmptySequenceError, FeasibilityError, NumericError
from .layers import log_softmax

BLANK = 0


@dataclass
class CtcResult:
    neg_log_likelihood: float
    logit_gradients: np.ndarray


def extend_labels(labels) -> np.ndarray:
    """Interleave blanks: [a, b] -> [_, a, _, b, _]."""
    ext = np.full(2 * len(labels) + 1, BLANK, dtype=np.int64)
    ext[1::2] = labels
    return ext


def min_frames(labels) -> int:
    """Shortest frame count admitting an alignment: one frame per symbol
    plus a separating blank between adjacent repeats."""
    labels = list(labels)
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def ctc_feasible(num_frames: int, labels) -> bool:
    return num_frames >= min_frames(labels)


def _validate(logits, labels):
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be (T, classes), got {logits.shape}")
    T, C = logits.shape
    if T == 0:
        raise EmptySequenceError("empty logit sequence")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise DimensionError("labels must be a flat symbol sequence")
    if labels.size and (labels.min() < 1 or labels.max() >= C):
        raise DimensionError(
            f"labels must lie in [1, {C - 1}] (0 is the blank), got "
            f"range [{labels.min()}, {labels.max()}]"
        )
    if not ctc_feasible(T, labels):
        raise FeasibilityError(
            f"label sequence needs >= {min_frames(labels)} frames, got {T}"
        )
    return logits, labels


def ctc_loss(logits, labels) -> CtcResult:
    """Negative log-likelihood and exact logit gradients for one sample.

    The DP runs in float64 regardless of the logit dtype; gradients are
    cast back. Each frame's gradient row sums to zero.
    """
    logits, labels = _validate(logits, labels)
    T, C = logits.shape
    lp = log_softmax(np.asarray(logits, dtype=np.float64), axis=1)
    ext = extend_labels(labels)
    S = ext.size
    can_skip = np.zeros(S, dtype=np.bool_)
    if S > 2:
        can_skip[2:] = (ext[2:] != BLANK) & (ext[2:] != ext[:-2])
    emit = np.ascontiguousarray(lp[:, ext])
    alpha, beta, log_total = kernels.ctc_alpha_beta(emit, can_skip)
    if not np.isfinite(log_total):
        raise NumericError("alignment lattice produced a non-finite likelihood")
    posterior = np.exp(alpha + beta - log_total)  # (T, S)
    label_mass = np.zeros((T, C))
    np.add.at(
        label_mass,
        (np.repeat(np.arange(T), S), np.tile(ext, T)),
        posterior.reshape(-1),
    )
    grads = (np.exp(lp) - label_mass).astype(logits.dtype)
    return CtcResult(neg_log_likelihood=float(-log_total), logit_gradients=grads)


def ctc_loss_batch(logits, lengths, label_seqs):
    """Mean loss over a padded batch.

    logits: (T, B, C); lengths[b] frames of sample b are real. Returns
    (mean nll, dlogits) with the gradient already scaled by 1/B and
    zeroed on padding.
    """
    T, B, C = logits.shape
    dlogits = np.zeros_like(logits)
    total = 0.0
    for b in range(B):
        res = ctc_loss(logits[: lengths[b], b], label_seqs[b])
        total += res.neg_log_likelihood
        dlogits[: lengths[b], b] = res.logit_gradients / B
    return total / B, dlogits


def greedy_decode(logits) -> list[int]:
    """Best path: per-frame argmax (ties -> lowest class index), collapse
    repeats, drop blanks."""
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be (T, classes), got {logits.shape}")
    path = np.argmax(logits, axis=1)
    out = []
    prev = -1
    for k in path:
        if k != prev and k != BLANK:
            out.append(int(k))
        prev = k
    return out
