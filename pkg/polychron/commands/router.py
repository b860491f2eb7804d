from __future__ import annotations

import argparse

from polychron.commands import capacity, evaluate, generate, resources, selftest, train


COMMANDS = [train, evaluate, generate, resources, capacity, selftest]


def register_commands(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    # Include all subcommands
    for command in COMMANDS:
        command.register(subparsers)
