"""Sample-domain primitives shared by the transmitter, channel and analysis code.

A :class:`SignalBuffer` is an immutable, uniformly sampled real waveform. The
samples are float64 internally; narrowing to float32 only happens when a run
writes its sample files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rmode_sim.errors import AlignmentError, DomainError


def sample_count(duration_s: float, sample_rate: float) -> int:
    """Number of samples covering ``duration_s`` at ``sample_rate``."""
    return max(0, int(round(duration_s * sample_rate)))


@dataclass(frozen=True, eq=False)
class SignalBuffer:
    """Uniformly sampled real waveform.

    ``unreliable_head`` / ``unreliable_tail`` count the samples at each end that
    filtering stages flagged as edge-affected; ``valid`` selects the rest.
    """

    samples: NDArray[np.float64]
    sample_rate: float
    start_time: float = 0.0
    unreliable_head: int = 0
    unreliable_tail: int = 0
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        data = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise DomainError(f"sample_rate must be positive and finite, got {self.sample_rate!r}")
        if not math.isfinite(self.start_time):
            raise DomainError(f"start_time must be finite, got {self.start_time!r}")
        if data.size and not np.isfinite(data).all():
            raise DomainError("samples must be finite (NaN/Inf found)")
        data.setflags(write=False)
        n = data.size
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))
        object.__setattr__(self, "unreliable_head", min(n, max(0, int(self.unreliable_head))))
        object.__setattr__(self, "unreliable_tail", min(n, max(0, int(self.unreliable_tail))))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def valid(self) -> slice:
        """Index range outside the flagged edge regions."""
        stop = max(self.unreliable_head, len(self) - self.unreliable_tail)
        return slice(self.unreliable_head, stop)

    def times(self) -> NDArray[np.float64]:
        return self.start_time + np.arange(len(self), dtype=np.float64) / self.sample_rate

    def replace(self, samples: ArrayLike, **changes: Any) -> "SignalBuffer":
        """New buffer with the same timing and flags but different samples."""
        params: dict[str, Any] = {
            "sample_rate": self.sample_rate,
            "start_time": self.start_time,
            "unreliable_head": self.unreliable_head,
            "unreliable_tail": self.unreliable_tail,
            "metadata": dict(self.metadata),
        }
        params.update(changes)
        return SignalBuffer(np.asarray(samples), **params)

    @classmethod
    def zeros(cls, n: int, sample_rate: float, start_time: float = 0.0) -> "SignalBuffer":
        return cls(np.zeros(n), sample_rate, start_time)


def check_aligned(a: SignalBuffer, b: SignalBuffer) -> None:
    """Raise :class:`AlignmentError` naming the first mismatched field."""
    if a.sample_rate != b.sample_rate:
        raise AlignmentError("sample_rate", a.sample_rate, b.sample_rate)
    if a.start_time != b.start_time:
        raise AlignmentError("start_time", a.start_time, b.start_time)
    if len(a) != len(b):
        raise AlignmentError("length", len(a), len(b))


def add_signals(a: SignalBuffer, b: SignalBuffer) -> SignalBuffer:
    """Elementwise sum of two aligned buffers."""
    check_aligned(a, b)
    return SignalBuffer(
        a.samples + b.samples,
        a.sample_rate,
        a.start_time,
        unreliable_head=max(a.unreliable_head, b.unreliable_head),
        unreliable_tail=max(a.unreliable_tail, b.unreliable_tail),
        metadata={**a.metadata, **b.metadata},
    )


def scale_signal(a: SignalBuffer, k: float) -> SignalBuffer:
    """Multiply every sample by ``k``."""
    k = float(k)
    if not math.isfinite(k):
        raise DomainError(f"scale factor must be finite, got {k!r}")
    return a.replace(a.samples * k)


def mean_square(a: SignalBuffer | NDArray[np.float64]) -> float:
    data = a.samples if isinstance(a, SignalBuffer) else np.asarray(a, dtype=np.float64)
    if data.size == 0:
        return 0.0
    return float(np.mean(data * data))


__all__ = [
    "SignalBuffer",
    "sample_count",
    "check_aligned",
    "add_signals",
    "scale_signal",
    "mean_square",
]
