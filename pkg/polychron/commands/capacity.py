from __future__ import annotations

import argparse

from polychron.resources.capacity import capacity, capacity_table


def register(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("capacity", help="Number of distinguishable spiking patterns")
    parser.add_argument("--n-t", type=int, default=64, help="Look-up tables")
    parser.add_argument("--n-c", type=int, default=10, help="Comparisons per table")
    parser.add_argument("--n", type=int, help="Neurons, for the firing-order capacity n!")
    parser.add_argument("--m", type=int, help="Latency bins per neuron, for m^n (needs --n)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    print(f"lut bits: {capacity(args.n_t, args.n_c)}")
    for row in capacity_table(args.n_t, args.n_c, args.n, args.m):
        print(f"{row.name:<8} {row.formula:<12} log10 = {row.log10_patterns:.2f}")
    return 0
