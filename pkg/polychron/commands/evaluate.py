from __future__ import annotations

import argparse
from pathlib import Path

from polychron.train.checkpoint import load_checkpoint
from polychron.train.corpus import load_corpus
from polychron.train.loop import evaluate


def register(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("eval", help="Validation bits per character of a checkpoint")
    parser.add_argument("--ckpt", type=Path, required=True, help="Checkpoint file")
    parser.add_argument("--data", type=Path, required=True, help="Corpus; its validation tail is scored")
    parser.add_argument("--max-windows", type=int, help="Cap on validation windows")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.ckpt)
    corpus = load_corpus(args.data, checkpoint.config.data.val_fraction)
    max_windows = args.max_windows or checkpoint.config.train.max_eval_windows
    bpc = evaluate(checkpoint.model, corpus, max_windows=max_windows)
    print(f"{bpc:.4f}")
    return 0
