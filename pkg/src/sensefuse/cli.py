"""Command-line entry point for the full pipeline.

Subcommands: gen-data, noise-preview, train, eval, trace, graft,
count-params. Every artifact-producing run writes a resolved-config
snapshot into the output directory; all randomness flows from --seed
(or the config's seed), so rerunning a command with the same inputs
reproduces its outputs byte for byte.

Exit codes: 0 success, 2 usage (argparse), 3 configuration error,
4 data-format error, 5 alignment-feasibility error, 6 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .checkpoint import Checkpoint, graft, load_checkpoint, save_checkpoint
from .corpus import generate_corpus, load_corpus, write_corpus
from .errors import (
    ConfigError,
    DataFormatError,
    FeasibilityError,
    NumericError,
    SensefuseError,
)
from .evaluate import evaluate_model, summarize_attention
from .model import (
    ClassifierSpec,
    ModelSpec,
    SensorSpec,
    build_model,
    count_params,
    trace_attention,
)
from .noise import NoiseProfileSpec, WalkConfig, profile_schedule, walk_schedule
from .rng import Prng
from .train import train as run_training

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_FEASIBILITY = 5
EXIT_NUMERIC = 6

# the five-model audio roster used for parameter accounting
REFERENCE_ROSTER = (
    ("single", "single", 1, 0),
    ("attention-2", "attention", 2, 20),
    ("attention-3", "attention", 3, 20),
    ("concat-2", "concat", 2, 0),
    ("concat-3", "concat", 3, 0),
)


def _roster_spec(architecture: str, n_sensors: int, attention_units: int) -> ModelSpec:
    sensors = tuple(
        SensorSpec(feature_dim=39, attention_units=attention_units)
        for _ in range(n_sensors)
    )
    return ModelSpec(
        architecture=architecture,
        sensors=sensors,
        classifier=ClassifierSpec(hidden=(150, 100)),
        num_classes=12,
    )


def _load_cfg(args) -> dict:
    cfg = cfgmod.load_config(args.config) if args.config else {}
    cfgmod.apply_overrides(cfg, args.set or [])
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _outdir(args) -> Path:
    if not args.out:
        raise ConfigError("this subcommand requires --out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _corpus_for(cfg) -> "Corpus":
    section = cfgmod.corpus_section(cfg)
    if "manifest" in section:
        return load_corpus(section["manifest"])
    return generate_corpus(cfgmod.corpus_spec(cfg))


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- subcommands ---------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    corpus = generate_corpus(cfgmod.corpus_spec(cfg))
    manifest = write_corpus(corpus, out)
    cfgmod.write_snapshot(cfg, out)
    print(f"wrote {len(corpus.train)} train / {len(corpus.test)} test samples")
    print(f"manifest: {manifest}")
    return EXIT_OK


def cmd_noise_preview(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    sigma_max = args.sigma_max if args.sigma_max is not None else 3.0
    length = args.length
    if args.kind == "walk":
        walk = cfgmod.walk_config(cfg.get("noise")) or WalkConfig(sigma_max=sigma_max)
        if args.sigma_max is not None and walk.sigma_max != sigma_max:
            walk = WalkConfig(
                sigma_max=sigma_max,
                gamma_shape=walk.gamma_shape,
                gamma_scale=walk.gamma_scale,
            )
        schedule = walk_schedule(Prng(cfg.get("seed", 0)), walk, length)
    else:
        spec = NoiseProfileSpec(
            kind=args.kind, params=dict(cfg.get("profile", {})), sigma_max=sigma_max
        )
        schedule = profile_schedule(spec, length)
    path = out / "schedule.csv"
    schedule.to_csv(path)
    cfgmod.write_snapshot(cfg, out)
    print(f"schedule: {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    corpus = _corpus_for(cfg)
    spec = cfgmod.model_spec(cfg, num_classes=corpus.spec.vocab_size + 1)
    tcfg = cfgmod.train_config(cfg)
    model = build_model(spec, Prng(tcfg.seed).split("init"))
    result = run_training(model, corpus.train, tcfg)
    result.checkpoint.config_hash = cfgmod.config_hash(cfg)
    ckpt_path = out / "checkpoint.sfck"
    save_checkpoint(ckpt_path, result.checkpoint)
    with open(out / "train_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    cfgmod.write_snapshot(cfg, out)
    print(f"checkpoint: {ckpt_path}")
    print(
        f"best epoch {result.best_epoch}, "
        f"val nll {result.checkpoint.metrics['best_val_nll']:.4f}, "
        f"excluded {result.excluded} infeasible samples"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    corpus = _corpus_for(cfg)
    ckpt = load_checkpoint(args.ckpt)
    model = ckpt.build_model()
    sigma_max = args.sigma_max
    walk = cfgmod.walk_config(cfg.get("eval", {}).get("noise"))
    if walk is None:
        walk = WalkConfig()
    if sigma_max is not None:
        if sigma_max == 0.0:
            condition_walk = None
        else:
            condition_walk = WalkConfig(
                sigma_max=sigma_max,
                gamma_shape=walk.gamma_shape,
                gamma_scale=walk.gamma_scale,
            )
    else:
        condition_walk = walk
    condition = args.condition
    if condition == "noisy" and condition_walk is None:
        condition = "clean"  # sigma-max 0 degenerates to the clean protocol
    profiles = None
    if condition == "profile":
        profiles = cfgmod.profile_specs(
            cfg, len(model.branches), condition_walk.sigma_max if condition_walk else 3.0
        )
    report = evaluate_model(
        model,
        corpus.split(args.split),
        condition,
        noise_seed=cfg.get("eval", {}).get("noise_seed", 1000),
        walk=condition_walk,
        profiles=profiles,
        collect_traces=args.traces,
    )
    _write_json(out / "metrics.json", report.metrics)
    if args.traces and report.traces:
        summary = summarize_attention(report.traces)
        summary.pop("lags", None)
        _write_json(out / "attention_summary.json", summary)
        for i, trace in enumerate(report.traces[: args.max_trace_files]):
            trace.to_csv(out / f"trace_{i:04d}.csv")
    cfgmod.write_snapshot(cfg, out)
    print(json.dumps(report.metrics, sort_keys=True))
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(args)
    corpus = _corpus_for(cfg)
    ckpt = load_checkpoint(args.ckpt)
    model = ckpt.build_model()
    samples = corpus.split(args.split)
    if args.sample_index >= len(samples):
        raise ConfigError(
            f"sample index {args.sample_index} out of range ({len(samples)})"
        )
    sample = samples[args.sample_index]
    T = sample.features.shape[0]
    sigma_max = args.sigma_max if args.sigma_max is not None else 3.0
    if args.profile:
        profiles = cfgmod.profile_specs(cfg, len(model.branches), sigma_max)
        schedules = [profile_schedule(p, T) for p in profiles]
    else:
        walk = WalkConfig(sigma_max=sigma_max)
        schedules = [
            walk_schedule(Prng(cfg.get("seed", 0)).split("trace", k), walk, T)
            for k in range(len(model.branches))
        ]
    trace, _ = trace_attention(
        model, sample.features, schedules, Prng(cfg.get("seed", 0))
    )
    path = out / "trace.csv"
    trace.to_csv(path)
    cfgmod.write_snapshot(cfg, out)
    print(f"trace: {path}")
    return EXIT_OK


def cmd_graft(args) -> int:
    front = load_checkpoint(args.front)
    body = load_checkpoint(args.body)
    grafted = graft(front, body)
    out = Path(args.out)
    if out.suffix != ".sfck":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "grafted.sfck"
    save_checkpoint(out, grafted)
    print(f"grafted checkpoint: {out}")
    return EXIT_OK


def cmd_count_params(args) -> int:
    rows = []
    if args.roster:
        for name, arch, n, att in REFERENCE_ROSTER:
            rows.append((name, count_params(_roster_spec(arch, n, att))))
    else:
        cfg = _load_cfg(args)
        spec = cfgmod.model_spec(cfg)
        rows.append((cfg.get("model", {}).get("name", "model"), count_params(spec)))
    width = max(len(name) for name, _ in rows)
    for name, count in rows:
        print(f"{name:<{width}}  {count}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sensefuse",
        description="multi-sensor attention-fusion sequence toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="experiment config YAML")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="root seed override")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="dotted-path config override (repeatable)",
        )

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    common(p)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("noise-preview", help="write a noise schedule CSV")
    common(p)
    p.add_argument(
        "--kind",
        default="walk",
        choices=("walk", "linear_sweep", "burst", "sinusoid", "constant"),
    )
    p.add_argument("--length", type=int, default=300)
    p.add_argument("--sigma-max", type=float, default=None)
    p.set_defaults(fn=cmd_noise_preview)

    p = sub.add_parser("train", help="train a model from a config")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--condition", default="clean", choices=("clean", "noisy", "profile"))
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--sigma-max", type=float, default=None)
    p.add_argument("--traces", action="store_true", help="collect attention traces")
    p.add_argument("--max-trace-files", type=int, default=8)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("trace", help="noise/attention trace for one sample")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--sample-index", type=int, default=0)
    p.add_argument("--profile", action="store_true", help="use deterministic profiles")
    p.add_argument("--sigma-max", type=float, default=None)
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("graft", help="splice a front end onto a classifier")
    p.add_argument("--front", required=True, help="donor checkpoint (sensors)")
    p.add_argument("--body", required=True, help="recipient checkpoint (classifier)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_graft)

    p = sub.add_parser("count-params", help="parameter accounting")
    p.add_argument("--config", help="experiment config YAML")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--roster", action="store_true", help="print the audio roster")
    p.set_defaults(fn=cmd_count_params, out=None, seed=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FeasibilityError as exc:
        print(f"feasibility error: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SensefuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
