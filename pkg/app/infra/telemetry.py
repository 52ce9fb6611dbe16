from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from time import perf_counter
from typing import Any, Dict, Iterator

from app.infra.logging import get_logger


@dataclass
class Span:
    """One timed phase; callers attach sizes to ``details`` while it runs."""

    name: str
    details: Dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0

    def describe(self) -> str:
        extra = ", ".join(f"{key}={value}" for key, value in self.details.items())
        return f"{self.name} ({extra})" if extra else self.name


@contextmanager
def timed_span(name: str, **details: Any) -> Iterator[Span]:
    logger = get_logger("telemetry")
    span = Span(name, dict(details))
    logger.debug("%s started", span.describe())
    start = perf_counter()
    try:
        yield span
    finally:
        span.elapsed = perf_counter() - start
        logger.info("%s completed in %.3fs", span.describe(), span.elapsed)


__all__ = ["Span", "timed_span"]
