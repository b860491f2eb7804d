from __future__ import annotations

import argparse
import sys

import structlog

from polychron import __version__
from polychron.commands.router import register_commands
from polychron.core.exceptions import ConfigError, CorpusError, PolychronError
from polychron.core.logging import setup_logging


logger = structlog.get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def create_parser() -> argparse.ArgumentParser:
    """Create the command-line parser."""
    parser = argparse.ArgumentParser(
        prog="polychron",
        description="Look-up-table spiking networks: training, evaluation, generation and cost reports.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Logging level (default: POLYCHRON_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    register_commands(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level, command=args.command)
    try:
        return int(args.handler(args))
    except (ConfigError, CorpusError) as e:
        logger.error("Invalid input", error=str(e))
        print(f"polychron {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PolychronError as e:
        logger.error("Command failed", error=str(e), error_type=type(e).__name__)
        print(f"polychron {args.command}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as e:
        logger.error("Invalid argument", error=str(e))
        print(f"polychron {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
