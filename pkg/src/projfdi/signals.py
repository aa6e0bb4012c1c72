"""Finite multichannel signal windows with implicit zero extension.

A :class:`SignalWindow` holds samples on the index range
[start_index, start_index + len - 1]; every index outside that range is
treated as exactly zero, which embeds the window into the square-summable
signals on the whole axis.  The inner product is sum_k x(k)^T y(k) and the
2-norm is its square root.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError

__all__ = ["SignalWindow", "stack_windows", "dot", "FrequencyGrid"]


@dataclass(frozen=True, eq=False)
class SignalWindow:
    """Finite sampled trajectory; zero outside its window."""

    samples: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if arr.ndim != 2:
            raise DimensionError("samples must be a (length, channels) array")
        if arr.size and not np.all(np.isfinite(arr)):
            raise DimensionError("samples contain non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "start_index", int(self.start_index))

    @classmethod
    def from_samples(cls, rows, start_index: int = 0) -> "SignalWindow":
        return cls(np.atleast_2d(np.asarray(rows, dtype=float)), start_index)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[1]

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    @property
    def end_index(self) -> int:
        """Index of the last stored sample."""
        return self.start_index + self.length - 1

    def __len__(self):
        return self.length

    def at(self, k: int) -> np.ndarray:
        """Sample at absolute index k (zero outside the window)."""
        if self.start_index <= k <= self.end_index:
            return self.samples[k - self.start_index]
        return np.zeros(self.channel_count)

    def energy(self) -> float:
        return float(np.sum(self.samples * self.samples))

    def norm(self) -> float:
        return float(np.sqrt(self.energy()))

    def shift(self, offset: int) -> "SignalWindow":
        return SignalWindow(self.samples, self.start_index + offset)

    def restrict(self, lo: int, hi: int) -> "SignalWindow":
        """Window content on [lo, hi] (inclusive), zero-padded as needed."""
        if hi < lo:
            raise DimensionError("restrict: empty range")
        out = np.zeros((hi - lo + 1, self.channel_count))
        a = max(lo, self.start_index)
        b = min(hi, self.end_index)
        if a <= b:
            out[a - lo:b - lo + 1] = self.samples[a - self.start_index:b - self.start_index + 1]
        return SignalWindow(out, lo)

    def scaled(self, alpha: float) -> "SignalWindow":
        return SignalWindow(alpha * self.samples, self.start_index)

    def __add__(self, other: "SignalWindow") -> "SignalWindow":
        lo = min(self.start_index, other.start_index)
        hi = max(self.end_index, other.end_index)
        a = self.restrict(lo, hi).samples + other.restrict(lo, hi).samples
        return SignalWindow(a, lo)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k"] + [f"ch{i}" for i in range(self.channel_count)])
        for offset, row in enumerate(self.samples):
            writer.writerow([self.start_index + offset] + [format(v, ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SignalWindow":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if not header or header[0] != "k":
            raise DimensionError("signal CSV must start with a 'k' column")
        ks, rows = [], []
        for rec in reader:
            if not rec:
                continue
            ks.append(int(rec[0]))
            rows.append([float(v) for v in rec[1:]])
        if not rows:
            raise DimensionError("signal CSV holds no samples")
        if any(ks[i + 1] - ks[i] != 1 for i in range(len(ks) - 1)):
            raise DimensionError("signal CSV indices must be contiguous")
        return cls(np.asarray(rows), ks[0])


def stack_windows(top: SignalWindow, bottom: SignalWindow) -> SignalWindow:
    """Channel-concatenate two windows over the union of their ranges."""
    lo = min(top.start_index, bottom.start_index)
    hi = max(top.end_index, bottom.end_index)
    t = top.restrict(lo, hi).samples
    b = bottom.restrict(lo, hi).samples
    return SignalWindow(np.hstack([t, b]), lo)


def dot(x: SignalWindow, y: SignalWindow) -> float:
    """Inner product sum_k x(k)^T y(k) over the overlap of the windows."""
    if x.channel_count != y.channel_count:
        raise DimensionError("dot: channel counts differ")
    lo = max(x.start_index, y.start_index)
    hi = min(x.end_index, y.end_index)
    if hi < lo:
        return 0.0
    a = x.samples[lo - x.start_index:hi - x.start_index + 1]
    b = y.samples[lo - y.start_index:hi - y.start_index + 1]
    return float(np.sum(a * b))


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform angles on [0, 2*pi) used for norm and identity checks."""

    count: int

    def __post_init__(self):
        if self.count < 1:
            raise DimensionError("grid count must be positive")

    @property
    def points(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.count) / self.count
