"""Evaluation protocols: clean, independently corrupted, and profiled.

Clean evaluation presents the same uncorrupted signal to every sensor.
The noisy condition corrupts each (sample, sensor) pair with its own
random-walk schedule from a seeded stream. The profile condition uses
deterministic per-sensor level shapes (sweep/burst/sinusoid/constant)
and is the generalization probe: the level dynamics were never seen in
training. Reports carry both sequence- and symbol-level error rates and,
for attention models, frame-aligned noise/attention traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ctc import greedy_decode
from .errors import ConfigError, DimensionError
from .metrics import corpus_report
from .model import AttentionTrace, FusionModel
from .noise import NoiseProfileSpec, WalkConfig, apply_noise, profile_schedule, walk_schedule
from .rng import Prng

CONDITIONS = ("clean", "noisy", "profile")


@dataclass
class EvalReport:
    condition: str
    metrics: dict
    refs: list
    hyps: list
    traces: list = field(default_factory=list)  # AttentionTrace per sample


def _schedules_for(condition, sample_index, lengths_t, n_sensors, *, root,
                   walk, profiles):
    """Per-sensor schedules for one sample (None means no corruption)."""
    if condition == "clean":
        return [None] * n_sensors
    if condition == "noisy":
        return [
            walk_schedule(root.split("eval", sample_index, k), walk, lengths_t)
            for k in range(n_sensors)
        ]
    return [profile_schedule(profiles[k], lengths_t) for k in range(n_sensors)]


def evaluate_model(
    model: FusionModel,
    samples,
    condition: str,
    *,
    noise_seed: int = 1000,
    walk: WalkConfig | None = None,
    profiles=None,
    batch_size: int = 32,
    collect_traces: bool = False,
) -> EvalReport:
    """Decode a split under one condition and compute corpus metrics."""
    if condition not in CONDITIONS:
        raise ConfigError(f"condition must be one of {CONDITIONS}, got {condition!r}")
    if condition == "noisy" and walk is None:
        walk = WalkConfig()
    n_sensors = len(model.branches)
    if condition == "profile":
        if profiles is None or len(profiles) != n_sensors:
            raise ConfigError(
                f"profile condition needs one NoiseProfileSpec per sensor "
                f"({n_sensors}), got {profiles and len(profiles)}"
            )
    root = Prng(noise_seed)
    dtype = model.spec.np_dtype()
    refs, hyps, traces = [], [], []
    is_attention = model.spec.architecture == "attention"
    for start in range(0, len(samples), batch_size):
        batch = samples[start : start + batch_size]
        lengths = [s.features.shape[0] for s in batch]
        T, B = max(lengths), len(batch)
        D = batch[0].features.shape[1]
        inputs = [np.zeros((T, B, D), dtype=dtype) for _ in range(n_sensors)]
        batch_sigmas = []
        for b, sample in enumerate(batch):
            idx = start + b
            schedules = _schedules_for(
                condition, idx, lengths[b], n_sensors,
                root=root, walk=walk, profiles=profiles,
            )
            sigmas = np.zeros((lengths[b], n_sensors))
            for k, sched in enumerate(schedules):
                if sched is None:
                    inputs[k][: lengths[b], b] = sample.features
                else:
                    mix = root.split("evalmix", idx, k)
                    inputs[k][: lengths[b], b] = apply_noise(
                        mix, sample.features, sched
                    )
                    sigmas[:, k] = sched.sigma
            batch_sigmas.append(sigmas)
        result = model.forward(inputs, lengths)
        for b, sample in enumerate(batch):
            refs.append(list(sample.labels))
            hyps.append(greedy_decode(result.logits[: lengths[b], b]))
            if collect_traces and is_attention:
                traces.append(
                    AttentionTrace(
                        sigma=batch_sigmas[b],
                        attention=np.array(result.attention[: lengths[b], b, :]),
                    )
                )
    return EvalReport(
        condition=condition,
        metrics=corpus_report(refs, hyps),
        refs=refs,
        hyps=hyps,
        traces=traces,
    )


# -- attention/noise analysis --------------------------------------------------


def correlate_attention(trace: AttentionTrace, *, lag_window: int = 25) -> dict:
    """Pearson correlation of noise-level difference vs attention difference.

    Two-sensor traces only. Also reports the per-crossover switch lag:
    for each frame where the noise ordering flips, the distance (frames)
    to the nearest attention-ordering flip within ``lag_window``.
    """
    if trace.sigma.shape[1] != 2:
        raise DimensionError("correlation analysis expects exactly 2 sensors")
    dsig = trace.sigma[:, 0] - trace.sigma[:, 1]
    datt = trace.attention[:, 0] - trace.attention[:, 1]
    out = {"undefined": False, "r": None, "lags": []}
    if np.ptp(dsig) == 0.0 or np.ptp(datt) == 0.0:
        out["undefined"] = True
        return out
    ds = dsig - dsig.mean()
    da = datt - datt.mean()
    out["r"] = float(
        (ds * da).sum() / np.sqrt((ds * ds).sum() * (da * da).sum())
    )
    sig_flips = np.nonzero(np.sign(dsig[1:]) * np.sign(dsig[:-1]) < 0)[0] + 1
    att_flips = np.nonzero(np.sign(datt[1:]) * np.sign(datt[:-1]) < 0)[0] + 1
    for t0 in sig_flips:
        if att_flips.size:
            delta = np.abs(att_flips - t0)
            j = int(np.argmin(delta))
            if delta[j] <= lag_window:
                out["lags"].append(int(att_flips[j] - t0))
    return out


def summarize_attention(traces, *, lag_window: int = 25) -> dict:
    """Median correlation and switch lag over a set of 2-sensor traces."""
    rs, lags, undefined = [], [], 0
    for trace in traces:
        stats = correlate_attention(trace, lag_window=lag_window)
        if stats["undefined"]:
            undefined += 1
            continue
        rs.append(stats["r"])
        lags.extend(stats["lags"])
    return {
        "median_r": float(np.median(rs)) if rs else None,
        "n_traces": len(rs),
        "n_undefined": undefined,
        "median_lag": float(np.median(np.abs(lags))) if lags else None,
        "lags": lags,
    }


def low_noise_dominance(trace: AttentionTrace, *, margin: float = 1.0,
                        min_frames: int = 20) -> list:
    """Intervals where one sensor is at least ``margin`` quieter for
    ``min_frames`` consecutive frames, with its mean attention there.

    Returns (sensor, start, end, mean_attention) tuples; end exclusive.
    """
    if trace.sigma.shape[1] != 2:
        raise DimensionError("dominance analysis expects exactly 2 sensors")
    out = []
    for quiet in (0, 1):
        loud = 1 - quiet
        mask = trace.sigma[:, quiet] <= trace.sigma[:, loud] - margin
        t = 0
        T = mask.size
        while t < T:
            if mask[t]:
                start = t
                while t < T and mask[t]:
                    t += 1
                if t - start >= min_frames:
                    out.append(
                        (
                            quiet,
                            start,
                            t,
                            float(trace.attention[start:t, quiet].mean()),
                        )
                    )
            else:
                t += 1
    return sorted(out, key=lambda item: (item[1], item[0]))
