"""``difftransfer`` command-line interface."""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import os
import sys
from pathlib import Path

from .exceptions import ConfigError, DiffTransferError

SEED_ENV = "DIFFTRANSFER_SEED"

DEFAULTS = {
    "learning_rate": 2e-5,
    "weight_decay": 1e-4,
    "batch_size": 16,
    "epochs": 5000,
    "steps": 50,
    "window_s": 0.020,
    "overlap": 0.5,
    "mel_bins": 128,
    "seed": 0,
    "crops_per_track_per_epoch": 1,
    "stage_filters": [64, 128, 256],
    "blocks_per_stage": 4,
    "bottleneck_filters": 512,
    "time_embed_dims": 32,
    "max_signal_rate": 0.95,
    "min_signal_rate": 0.02,
    "gl_iterations": 100,
    "source_dir": "timbreA",
    "target_dir": "timbreB",
}

# The DSP front end is fixed; these keys are accepted only at their defaults.
FIXED_KEYS = ("window_s", "overlap", "mel_bins")


def _check_type(key, value):
    expected = DEFAULTS[key]
    if isinstance(expected, bool) or isinstance(value, bool):
        ok = type(value) is type(expected)
    elif isinstance(expected, int):
        ok = isinstance(value, int)
    elif isinstance(expected, float):
        ok = isinstance(value, (int, float))
        value = float(value) if ok else value
    elif isinstance(expected, list):
        ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    else:
        ok = isinstance(value, type(expected))
    if not ok:
        kind = "list of int" if isinstance(expected, list) else type(expected).__name__
        raise ConfigError(f"{key}: expected {kind}, got {type(value).__name__} ({value!r})")
    return value


def parse_config(path=None, overrides: dict | None = None) -> dict:
    """Resolve defaults < config file < explicit overrides.

    The file is a flat JSON object. Unknown keys and type mismatches raise
    :class:`ConfigError`. When no seed is given anywhere, ``DIFFTRANSFER_SEED``
    is used if set.
    """
    cfg = {k: (list(v) if isinstance(v, list) else v) for k, v in DEFAULTS.items()}
    layers = []
    if path is not None:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a flat JSON object")
        layers.append(data)
    layers.append({k: v for k, v in (overrides or {}).items() if v is not None})

    seed_given = any("seed" in layer for layer in layers)
    for layer in layers:
        for key, value in layer.items():
            if key not in DEFAULTS:
                close = difflib.get_close_matches(key, DEFAULTS, n=1)
                hint = f"; did you mean {close[0]!r}?" if close else ""
                raise ConfigError(f"unknown config key {key!r}{hint} valid keys: {', '.join(sorted(DEFAULTS))}")
            cfg[key] = _check_type(key, value)
    if not seed_given and os.environ.get(SEED_ENV):
        try:
            cfg["seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    for key in FIXED_KEYS:
        if cfg[key] != DEFAULTS[key]:
            raise ConfigError(f"{key} is fixed at {DEFAULTS[key]} by the spectrogram front end")
    return cfg


def _print_config(cfg: dict) -> None:
    print("resolved config: " + json.dumps(cfg, sort_keys=True), flush=True)


# ------------------------------------------------------------------ commands


def cmd_make_toy_dataset(args) -> int:
    from .toydata import generate_paired_dataset

    manifest = generate_paired_dataset(args.seed, args.tracks, args.duration, args.out, voices=args.voices)
    print(f"wrote {manifest['n_tracks']} pairs to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .denoiser import UNetConfig
    from .schedule import ScheduleConfig
    from .toydata import load_paired_corpus
    from .trainer import TrainConfig, fit, load_corpus

    cfg = parse_config(args.config, {
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "weight_decay": args.weight_decay,
        "seed": args.seed,
        "stage_filters": args.stage_filters,
        "blocks_per_stage": args.blocks_per_stage,
        "bottleneck_filters": args.bottleneck_filters,
        "crops_per_track_per_epoch": args.crops_per_track,
    })
    _print_config(cfg)
    if not Path(args.data).is_dir():
        raise FileNotFoundError(f"data directory {args.data} does not exist")
    pairs = load_paired_corpus(args.data, cfg["source_dir"], cfg["target_dir"])
    corpus = load_corpus(pairs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = fit(
        corpus,
        TrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"], learning_rate=cfg["learning_rate"],
                    weight_decay=cfg["weight_decay"], seed=cfg["seed"],
                    crops_per_track_per_epoch=cfg["crops_per_track_per_epoch"]),
        UNetConfig(stage_filters=tuple(cfg["stage_filters"]), blocks_per_stage=cfg["blocks_per_stage"],
                   bottleneck_filters=cfg["bottleneck_filters"], time_embed_dims=cfg["time_embed_dims"]),
        ScheduleConfig(cfg["max_signal_rate"], cfg["min_signal_rate"]),
        log_path=out / "train_log.jsonl",
    )
    ckpt.training_meta["resolved_config"] = cfg
    ckpt.save(out)
    meta = ckpt.training_meta
    print(f"saved checkpoint to {out} (best epoch {meta['epoch']}, loss {meta['loss']:.4f})")
    return 0


def cmd_transfer(args) -> int:
    from .denoiser import DenoiserCheckpoint
    from .transfer import transfer_corpus

    cfg = parse_config(args.config, {"steps": args.steps, "seed": args.seed, "gl_iterations": args.gl_iterations})
    _print_config(cfg)
    if cfg["steps"] < 1:
        raise ConfigError("steps must be >= 1")
    ckpt = DenoiserCheckpoint.load(args.ckpt)
    failed = transfer_corpus(args.in_dir, ckpt, args.out, cfg["steps"], cfg["seed"], cfg["gl_iterations"])
    if failed:
        print(f"error: {len(failed)} file(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_evaluate(args) -> int:
    from .metrics import evaluate

    for d in (args.generated, args.reference):
        if not Path(d).is_dir():
            raise FileNotFoundError(f"directory {d} does not exist")
    report = evaluate(args.generated, args.reference)
    report.to_json(args.report)
    print(f"FAD {report.fad:.4f}  JD {report.jd_mean:.4f}  ({len(report.tracks)} tracks) -> {args.report}")
    return 0


def cmd_info(args) -> int:
    from .denoiser import read_manifest

    manifest = read_manifest(args.ckpt)
    sched = manifest["schedule"]
    norm = manifest["normalization"] or {}
    print(f"schedule: max_signal_rate={sched['max_signal_rate']} min_signal_rate={sched['min_signal_rate']}")
    print(f"normalization: lo={norm.get('lo')} hi={norm.get('hi')}")
    meta = {k: v for k, v in manifest["training_meta"].items() if k != "loss_history"}
    print("unet: " + json.dumps(manifest["unet"], sort_keys=True))
    print("training: " + json.dumps(meta, sort_keys=True))
    return 0


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="difftransfer", description="Paired timbre transfer with a conditional DDIM.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-toy-dataset", help="render a synthetic paired corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tracks", type=int, default=50)
    p.add_argument("--duration", type=float, default=4.0)
    p.add_argument("--voices", type=int, default=1)
    p.set_defaults(func=cmd_make_toy_dataset)

    p = sub.add_parser("train", help="train a denoiser on a paired corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--stage-filters", type=_int_list)
    p.add_argument("--blocks-per-stage", type=int)
    p.add_argument("--bottleneck-filters", type=int)
    p.add_argument("--crops-per-track", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="convert a directory of WAVs")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gl-iterations", type=int)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("evaluate", help="FAD and Jaccard pitch distance against references")
    p.add_argument("--generated", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("info", help="print a checkpoint manifest")
    p.add_argument("--ckpt", required=True)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DiffTransferError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
