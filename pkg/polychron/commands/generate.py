from __future__ import annotations

import argparse
import sys
from pathlib import Path

from polychron.models.generate import generate
from polychron.train.checkpoint import load_checkpoint


def register(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("generate", help="Sample bytes from a checkpoint")
    parser.add_argument("--ckpt", type=Path, required=True, help="Checkpoint file")
    parser.add_argument("--prompt", required=True, help="Prompt text (UTF-8)")
    parser.add_argument("--len", dest="length", type=int, default=200, help="Bytes to generate")
    parser.add_argument("--temp", type=float, default=1.0, help="Sampling temperature")
    parser.add_argument("--seed", type=int, default=0, help="Sampling seed")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.ckpt)
    if args.length == 0:
        return 0
    text = generate(
        checkpoint.model,
        args.prompt.encode("utf-8"),
        args.length,
        temperature=args.temp,
        seed=args.seed,
    )
    sys.stdout.buffer.write(text)
    sys.stdout.buffer.flush()
    return 0
