from __future__ import annotations

import logging
import sys

import structlog
from structlog.types import Processor

from polychron.core.config import settings


def setup_logging(level: str | None = None, *, command: str | None = None) -> None:
    """Route structured events (training progress, checkpoints, failures) to stderr.

    stdout stays free for what a command prints: curves, reports, generated
    text. ``level`` wins over ``POLYCHRON_LOG_LEVEL``; ``command`` is bound to
    every event of the run so interleaved logs from several runs can be told
    apart. Outside development, or with ``POLYCHRON_LOG_FORMAT=json``, events
    are one JSON object per line.
    """
    level_name = (level or settings.log_level).upper()
    numeric_level = getattr(logging, level_name, logging.WARNING)

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=numeric_level,
    )

    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="ISO"),
    ]

    if settings.log_format == "console" and settings.is_development:
        processors.append(structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty()))
    else:
        processors.extend([
            structlog.processors.dict_tracebacks,
            structlog.processors.JSONRenderer(),
        ])

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=structlog.WriteLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )

    structlog.contextvars.clear_contextvars()
    if command is not None:
        structlog.contextvars.bind_contextvars(command=command)
