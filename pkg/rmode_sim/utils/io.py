"""Readers and writers for run artifacts.

Sample files are raw little-endian float32 (``.f32``) or IEEE-float WAV.
Every OS-level failure surfaces as :class:`OutputError` carrying the path.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.io import wavfile

from rmode_sim.errors import OutputError
from rmode_sim.utils.paths import ensure_parent_dir

SAMPLE_DTYPE = np.dtype("<f4")


def write_raw(path: Path, samples: ArrayLike) -> Path:
    try:
        ensure_parent_dir(path)
        np.asarray(samples, dtype=np.float64).astype(SAMPLE_DTYPE).tofile(path)
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


def read_raw(path: Path) -> NDArray[np.float32]:
    try:
        return np.fromfile(path, dtype=SAMPLE_DTYPE)
    except OSError as exc:
        raise OutputError(path, exc) from exc


def write_wav(path: Path, samples: ArrayLike, sample_rate: float) -> Path:
    """Mono IEEE-float WAV; the header rate is the sample rate rounded to an integer."""
    try:
        ensure_parent_dir(path)
        data = np.asarray(samples, dtype=np.float64).astype(np.float32)
        wavfile.write(path, int(round(sample_rate)), data)
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


def write_traces_csv(path: Path, columns: Mapping[str, ArrayLike]) -> Path:
    """Comma-separated columns with a header row, full double precision."""
    names: Sequence[str] = list(columns)
    table = np.column_stack([np.asarray(columns[name], dtype=np.float64) for name in names])
    try:
        ensure_parent_dir(path)
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(names), comments="")
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


def read_traces_csv(path: Path) -> dict[str, NDArray[np.float64]]:
    try:
        with path.open("r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            table = np.loadtxt(f, delimiter=",", ndmin=2)
    except OSError as exc:
        raise OutputError(path, exc) from exc
    if table.size == 0:
        return {name: np.zeros(0) for name in header}
    return {name: table[:, i] for i, name in enumerate(header)}


def json_safe(obj: Any) -> Any:
    """``obj`` with every non-finite float replaced by ``None``.

    JSON has no infinity; a noiseless run reports its SNR as null.
    """
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    return obj


def write_json(path: Path, data: Any) -> Path:
    """Strict RFC 8259 JSON: non-finite floats are written as null."""
    try:
        ensure_parent_dir(path)
        path.write_text(json.dumps(json_safe(data), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


def read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(path, exc) from exc
    except json.JSONDecodeError as exc:
        raise OutputError(path, f"invalid JSON: {exc}") from exc


__all__ = [
    "SAMPLE_DTYPE",
    "write_raw",
    "read_raw",
    "write_wav",
    "write_traces_csv",
    "read_traces_csv",
    "json_safe",
    "write_json",
    "read_json",
]
