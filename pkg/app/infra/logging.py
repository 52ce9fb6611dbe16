from __future__ import annotations

import logging
from logging.config import dictConfig
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler


def _stderr_handler(rich_tracebacks: bool = True) -> RichHandler:
    # stdout carries the CLI tables; log records go to stderr
    return RichHandler(
        console=Console(stderr=True),
        rich_tracebacks=rich_tracebacks,
        show_path=False,
        log_time_format="%H:%M:%S",
    )


def setup_logging(level: str = "WARNING", rich_tracebacks: bool = True) -> None:
    """Route every logger under ``app`` through one rich stderr handler."""
    level = level.upper()
    dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "handlers": {
                "rich": {
                    "()": _stderr_handler,
                    "rich_tracebacks": rich_tracebacks,
                    "level": level,
                }
            },
            "loggers": {
                "app": {"level": level, "handlers": ["rich"], "propagate": False},
                "telemetry": {"level": level, "handlers": ["rich"], "propagate": False},
            },
            "root": {"level": "WARNING"},
        }
    )


def get_logger(name: Optional[str] = None) -> logging.Logger:
    return logging.getLogger(name or "app")


__all__ = ["get_logger", "setup_logging"]
