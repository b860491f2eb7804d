from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from polychron.resources.analytic import (
    AnnTransformerConfig,
    ResourceReport,
    ann_transformer_report,
    model_report,
    snn_head_report,
    snn_rnn_report,
    snn_transformer_report,
)
from polychron.resources.render import render_csv, render_text
from polychron.train.checkpoint import load_checkpoint


# Spiking RNN of the byte-level experiments
RNN_DEFAULTS: dict[str, Any] = {"n": 64, "n_t": 64, "n_c": 10, "n_t_u": 64, "n_c_u": 6}

# Attention-only transformer compared against the dense baseline
SNN_DEFAULTS: dict[str, Any] = {"n": 16, "n_t": 10, "n_c": 6, "p": 4, "n_inp": 32, "heads": 1, "layers": 6}

ANN_DEFAULTS: dict[str, Any] = {"d_model": 512, "d_k": 64, "d_ff": 2048, "n_inp": 32, "heads": 8, "layers": 6}


def register(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "resources",
        help="Memory footprint, bandwidth and compute figures",
        description="Unset parameters take the defaults of the chosen model.",
    )
    parser.add_argument(
        "--model",
        choices=["rnn", "snn-transformer", "ann-transformer"],
        default="rnn",
        help="Which closed form to evaluate",
    )
    parser.add_argument("--ckpt", type=Path, help="Report a trained model instead of a closed form")
    parser.add_argument("--format", choices=["text", "csv"], default="text", help="Output format")
    parser.add_argument("--n", type=int, help="Embedding / hidden dimension")
    parser.add_argument("--n-t", type=int, help="Look-up tables per transform")
    parser.add_argument("--n-c", type=int, help="Comparisons per table")
    parser.add_argument("--n-t-u", type=int, help="Unembedder tables")
    parser.add_argument("--n-c-u", type=int, help="Unembedder comparisons")
    parser.add_argument("--p", type=int, help="Positional encoder dimension")
    parser.add_argument("--n-inp", type=int, help="Context size")
    parser.add_argument("--heads", type=int, help="Attention heads per layer")
    parser.add_argument("--layers", type=int, help="Layers")
    parser.add_argument(
        "--ffn", action=argparse.BooleanOptionalAction, default=False,
        help="Count the per-layer FFN in the whole-model transformer report",
    )
    parser.add_argument("--d-model", type=int, help="Dense transformer embedding dimension")
    parser.add_argument("--d-k", type=int, help="Dense transformer key dimension")
    parser.add_argument("--d-ff", type=int, help="Dense transformer FFN dimension")
    parser.set_defaults(handler=run)


def _values(args: argparse.Namespace, defaults: dict[str, Any]) -> dict[str, Any]:
    values = {}
    for key, default in defaults.items():
        given = getattr(args, key)
        values[key] = default if given is None else given
    return values


def build_reports(args: argparse.Namespace) -> list[tuple[str, ResourceReport]]:
    if args.ckpt is not None:
        checkpoint = load_checkpoint(args.ckpt)
        return [(f"model from {args.ckpt}", model_report(checkpoint.model))]
    if args.model == "rnn":
        v = _values(args, RNN_DEFAULTS)
        report = snn_rnn_report(v["n"], v["n_t"], v["n_c"], v["n_t_u"], v["n_c_u"])
        return [("spiking RNN, per token", report)]
    if args.model == "snn-transformer":
        v = _values(args, SNN_DEFAULTS)
        head = snn_head_report(v["n"], v["n_t"], v["n_c"], v["p"], v["n_inp"])
        whole = snn_transformer_report(
            v["n"],
            v["n_t"],
            v["n_c"],
            v["p"],
            v["n_inp"],
            v["heads"],
            v["layers"],
            ffn_enabled=args.ffn,
            n_t_u=args.n_t_u,
            n_c_u=args.n_c_u,
        )
        return [
            ("SNN transformer, per layer per head", head),
            ("SNN transformer, whole model", whole),
        ]
    v = _values(args, ANN_DEFAULTS)
    cfg = AnnTransformerConfig(
        d_model=v["d_model"], d_k=v["d_k"], d_ff=v["d_ff"], n_inp=v["n_inp"], N=v["layers"], h=v["heads"],
    )
    return [("dense transformer, per layer", ann_transformer_report(cfg))]


def run(args: argparse.Namespace) -> int:
    reports = build_reports(args)
    if args.format == "csv":
        for index, (_, report) in enumerate(reports):
            text = render_csv(report)
            # one header for the whole output
            print(text if index == 0 else text.split("\n", 1)[1], end="")
        return 0
    print("\n".join(render_text(report, title) for title, report in reports), end="")
    return 0
