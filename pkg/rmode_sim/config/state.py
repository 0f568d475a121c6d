from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Optional

# ---- Shared progress state (process-local cache) ---- #


@dataclass
class ProgressState:
    progress: int = 0
    status: str = "setting up"
    stage: str | None = None
    message: str = ""
    done: bool = False
    error: str | None = None
    report: dict[str, Any] | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def snapshot(self) -> dict[str, Any]:
        with self._lock:
            return {
                "progress": self.progress,
                "status": self.status,
                "stage": self.stage,
                "message": self.message,
                "done": self.done,
                "error": self.error,
            }


# Cache keyed by run_id (so concurrent runs can be tracked independently)
_STATE_CACHE: dict[str, ProgressState] = {}


def get_progress_state(run_id: str) -> ProgressState:
    state = _STATE_CACHE.get(run_id)
    if state is None:
        state = ProgressState()
        _STATE_CACHE[run_id] = state
    return state


def peek_progress_state(run_id: str) -> ProgressState | None:
    """State of ``run_id`` if it was ever started; never creates an entry."""
    return _STATE_CACHE.get(run_id)


def reset_progress_state(run_id: str) -> ProgressState:
    state = ProgressState()
    _STATE_CACHE[run_id] = state
    return state


def set_stage(run_id: str, index: int, total: int, stage: str, message: str) -> int:
    """Record that stage ``index`` of ``total`` started; returns the percentage reached."""
    ps = get_progress_state(run_id)
    pct = int(round(100 * index / max(1, total)))
    with ps._lock:
        ps.progress = pct
        ps.stage = stage
        ps.message = message
        ps.status = "completed" if index >= total else "running"
    return pct


def finish(run_id: str, report: Optional[dict[str, Any]] = None, error: Optional[str] = None) -> None:
    ps = get_progress_state(run_id)
    with ps._lock:
        ps.done = True
        ps.report = report
        ps.error = error
        if error is not None:
            ps.status = "failed"
            ps.message = error


__all__ = [
    "ProgressState",
    "get_progress_state",
    "peek_progress_state",
    "reset_progress_state",
    "set_stage",
    "finish",
]
