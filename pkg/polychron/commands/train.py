from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import structlog

from polychron.core.config import (
    ExperimentConfig,
    load_experiment_config,
    parse_overrides,
    settings,
)
from polychron.core.exceptions import ConfigError
from polychron.models.base import parameter_count
from polychron.models.factory import build_model
from polychron.train.checkpoint import load_checkpoint, save_checkpoint
from polychron.train.corpus import load_corpus
from polychron.train.loop import CURVE_HEADER, CurveRow, train_loop


logger = structlog.get_logger()

CURVE_FILE = "curve.csv"


def register(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("train", help="Train a byte-level language model")
    parser.add_argument("--config", type=Path, help="INI file with [model] [train] [data] sections")
    parser.add_argument("--data", type=Path, required=True, help="Training corpus (raw bytes)")
    parser.add_argument("--out", type=Path, required=True, help="Directory for curve.csv and checkpoints")
    parser.add_argument("--resume", type=Path, help="Checkpoint to continue from")
    parser.add_argument("--seed", type=int, help="Override train.seed")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one config value (repeatable, wins over --config)",
    )
    parser.add_argument("--threads", type=int, help="Worker threads (default: POLYCHRON_THREADS)")
    parser.set_defaults(handler=run)


def _resumed_config(base: ExperimentConfig, overrides: dict[str, dict[str, str]]) -> ExperimentConfig:
    if "model" in overrides:
        raise ConfigError("model settings cannot change when resuming")
    if "seed" in overrides.get("train", {}):
        raise ConfigError("the seed cannot change when resuming; the checkpoint restores the generator")
    lines = base.to_lines()
    for section, values in overrides.items():
        lines += [f"{section}.{key}={value}" for key, value in values.items()]
    return ExperimentConfig.from_lines(lines)


def run(args: argparse.Namespace) -> int:
    overrides = parse_overrides(args.set)
    if args.seed is not None:
        overrides.setdefault("train", {})["seed"] = str(args.seed)
    threads = args.threads or settings.threads

    if args.resume is not None:
        checkpoint = load_checkpoint(args.resume)
        config = _resumed_config(checkpoint.config, overrides)
        model = checkpoint.model
        rng = checkpoint.generator()
        start_step = checkpoint.step
    else:
        config = load_experiment_config(args.config, overrides)
        rng = np.random.default_rng(config.train.seed)
        model = build_model(config.model, rng)
        start_step = 0

    corpus = load_corpus(args.data, config.data.val_fraction)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    curve_path = out / CURVE_FILE
    if args.resume is None or not curve_path.exists():
        curve_path.write_text(CURVE_HEADER + "\n", encoding="utf-8")

    logger.info(
        "Run configured",
        kind=config.model.kind.value,
        parameters=parameter_count(model),
        start_step=start_step,
        out=str(out),
    )

    def on_eval(row: CurveRow) -> None:
        with curve_path.open("a", encoding="utf-8") as handle:
            handle.write(row.csv_line() + "\n")
        print(f"step {row.step} train_loss {row.train_loss_nats:.4f} val_bpc {row.val_bpc:.4f}", flush=True)

    def on_checkpoint(step: int) -> None:
        save_checkpoint(out / f"step_{step}.ckpt", model, config, step, rng)

    train_loop(
        model,
        corpus,
        config,
        rng,
        start_step=start_step,
        threads=threads,
        on_eval=on_eval,
        on_checkpoint=on_checkpoint,
    )
    return 0
