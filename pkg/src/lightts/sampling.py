"""Down-sampling transforms for one look-back window.

A window of length T is reshaped into a C x (T/C) matrix whose columns are
non-overlapping sub-sequences of length C. No token is dropped or
duplicated, so both transforms are exact permutations with exact inverses.

Index laws (1-indexed):
    continuous: entry (i, j) = w[(j-1)*C + i]   -- column j is the j-th
                consecutive chunk of C tokens (short-term local view)
    interval:   entry (i, j) = w[j + (i-1)*(T/C)] -- column j strides
                through the window with step T/C (long-term global view)
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, ShapeError


class SampleKind(Enum):
    CONTINUOUS = "continuous"
    INTERVAL = "interval"


@dataclass(frozen=True)
class SampleMatrix:
    """C x (T/C) down-sampled view of one window, tagged with its transform."""

    data: np.ndarray
    C: int
    kind: SampleKind

    @property
    def window_len(self) -> int:
        return self.data.size


def _as_window(w) -> np.ndarray:
    a = np.asarray(w, dtype=np.float64).reshape(-1)
    if a.size < 2:
        raise ShapeError(f"look-back window needs length >= 2, got {a.size}")
    return a


def divisors(T: int) -> list:
    """All positive divisors of T, ascending."""
    ds = [d for d in range(1, T + 1) if T % d == 0]
    return ds


def default_chunk_len(T: int) -> int:
    """Divisor of T closest to sqrt(T); ties break to the smaller divisor."""
    root = math.sqrt(T)
    return min(divisors(T), key=lambda d: (abs(d - root), d))


def check_chunk_len(T: int, C: int) -> None:
    if C < 1:
        raise ConfigError(f"sub-sequence length C must be >= 1, got {C}")
    if C > T:
        raise ShapeError(f"sub-sequence length C={C} exceeds window length T={T}")
    if T % C != 0:
        near = sorted(divisors(T), key=lambda d: (abs(d - C), d))[:4]
        raise ConfigError(
            f"C={C} does not divide window length T={T}; "
            f"nearest valid values: {near}"
        )


def continuous_sample(w, C: int) -> SampleMatrix:
    """Chunk the window into T/C consecutive length-C pieces (one per column)."""
    a = _as_window(w)
    check_chunk_len(a.size, C)
    data = a.reshape(a.size // C, C).T.copy()
    return SampleMatrix(data, C, SampleKind.CONTINUOUS)


def interval_sample(w, C: int) -> SampleMatrix:
    """Stride through the window with step T/C; column j collects
    w[j], w[j + T/C], ..., w[j + (C-1)*T/C] (1-indexed)."""
    a = _as_window(w)
    check_chunk_len(a.size, C)
    data = a.reshape(C, a.size // C).copy()
    return SampleMatrix(data, C, SampleKind.INTERVAL)


def reconstruct(m: SampleMatrix) -> np.ndarray:
    """Invert the matching sampler: reconstruct(sample(w, C)) == w exactly."""
    if m.kind is SampleKind.CONTINUOUS:
        return m.data.T.reshape(-1).copy()
    return m.data.reshape(-1).copy()
