"""Console logging through rich."""
from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

console = Console(stderr=True)

_configured = False


def setup_logging(level: str | int | None = None) -> None:
    """Route the ``rmode_sim`` loggers to a rich handler (once per process)."""
    global _configured
    if level is None:
        from rmode_sim.config.settings import settings

        level = settings.log_level
    root = logging.getLogger("rmode_sim")
    root.setLevel(level if isinstance(level, int) else str(level).upper())
    if _configured:
        return
    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    root.addHandler(handler)
    root.propagate = False
    _configured = True


__all__ = ["console", "setup_logging"]
