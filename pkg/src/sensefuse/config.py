"""Declarative experiment configuration.

One YAML file describes an experiment end-to-end: corpus (inline
synthesis spec or a manifest path), model, training, and evaluation.
Dotted-path overrides (``--set train.max_epochs=5``) are applied after
parsing, and every artifact-producing run writes the resolved config
snapshot next to its outputs so any result can be reproduced from the
snapshot plus the seed.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import yaml

from .corpus import SyntheticTaskSpec, task_spec_from_dict
from .errors import ConfigError
from .model import ClassifierSpec, ModelSpec, SensorSpec, spec_from_dict
from .noise import NoiseProfileSpec, WalkConfig
from .train import TrainConfig


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"config root must be a mapping, got {type(cfg).__name__}")
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply dotted-key overrides in place; values parse as YAML scalars."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key.path=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()[:16]


def write_snapshot(cfg: dict, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "config.resolved.yaml"
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)
    return path


# -- section builders ----------------------------------------------------------


def corpus_section(cfg: dict) -> dict:
    section = cfg.get("corpus")
    if not isinstance(section, dict):
        raise ConfigError("config needs a 'corpus' mapping")
    return section


def corpus_spec(cfg: dict) -> SyntheticTaskSpec:
    section = dict(corpus_section(cfg))
    section.pop("manifest", None)
    if "seed" not in section and "seed" in cfg:
        section["seed"] = cfg["seed"]
    return task_spec_from_dict(section)


def model_spec(cfg: dict, *, num_classes: int | None = None) -> ModelSpec:
    section = cfg.get("model")
    if not isinstance(section, dict):
        raise ConfigError("config needs a 'model' mapping")
    section = dict(section)
    if "num_classes" not in section:
        if num_classes is None:
            try:
                num_classes = corpus_spec(cfg).vocab_size + 1
            except ConfigError as exc:
                raise ConfigError(
                    "model.num_classes missing and not derivable from the corpus"
                ) from exc
        section["num_classes"] = num_classes
    if "classifier" not in section:
        raise ConfigError("model section needs a 'classifier' mapping")
    if "sensors" not in section:
        raise ConfigError("model section needs a 'sensors' list")
    return spec_from_dict(section)


def walk_config(section: dict | None) -> WalkConfig | None:
    if section is None:
        return None
    try:
        return WalkConfig(
            sigma_max=float(section.get("sigma_max", 3.0)),
            gamma_shape=float(section.get("gamma_shape", 0.8)),
            gamma_scale=float(section.get("gamma_scale", 0.2)),
            sigma0_upper=(
                float(section["sigma0_upper"]) if "sigma0_upper" in section else None
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed noise config: {exc}") from exc


def train_config(cfg: dict) -> TrainConfig:
    section = cfg.get("train", {})
    if not isinstance(section, dict):
        raise ConfigError("'train' section must be a mapping")
    noise = section.get("noise", "default")
    if noise == "default":
        walk = WalkConfig()
    else:
        walk = walk_config(noise)
    try:
        config = TrainConfig(
            max_epochs=int(section.get("max_epochs", 100)),
            patience=int(section.get("patience", 10)),
            batch_size=int(section.get("batch_size", 16)),
            seed=int(section.get("seed", cfg.get("seed", 0))),
            learning_rate=float(section.get("learning_rate", 1e-3)),
            clip_norm=float(section.get("clip_norm", 5.0)),
            val_fraction=float(section.get("val_fraction", 0.1)),
            noise=walk,
            noise_per_sensor=bool(section.get("noise_per_sensor", True)),
            eval_cadence=int(section.get("eval_cadence", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed train config: {exc}") from exc
    config.validate()
    return config


def profile_specs(cfg: dict, n_sensors: int, sigma_max: float):
    section = cfg.get("eval", {}).get("profiles")
    if section is None:
        # default generalization battery: opposed sweeps
        if n_sensors != 2:
            raise ConfigError("default profiles assume 2 sensors; configure "
                              "'eval.profiles' explicitly")
        return [
            NoiseProfileSpec("linear_sweep", {"start": 0.0, "end": sigma_max},
                             sigma_max=sigma_max),
            NoiseProfileSpec("linear_sweep", {"start": sigma_max, "end": 0.0},
                             sigma_max=sigma_max),
        ]
    if len(section) != n_sensors:
        raise ConfigError(
            f"eval.profiles must list one profile per sensor ({n_sensors})"
        )
    out = []
    for entry in section:
        out.append(
            NoiseProfileSpec(
                kind=entry.get("kind", "constant"),
                params=dict(entry.get("params", {})),
                sigma_max=float(entry.get("sigma_max", sigma_max)),
            )
        )
    return out
