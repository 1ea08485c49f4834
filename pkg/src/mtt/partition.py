"""Splitting a sequence into subsequences from its detection-count curve.

Adaptive mode cuts where the median-filtered count leaves a running band
and then caps each piece by length and by detection total. Fixed-length and
sliding-window modes are kept as baselines.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import Config, ConfigError


@dataclass(frozen=True)
class Subsequence:
    first: int
    last: int
    detection_total: int = 0

    def __post_init__(self):
        if not 1 <= self.first <= self.last:
            raise ValueError(f"invalid frame range [{self.first}, {self.last}]")

    @property
    def frame_range(self) -> tuple[int, int]:
        return (self.first, self.last)

    def __len__(self) -> int:
        return self.last - self.first + 1

    def __contains__(self, frame: int) -> bool:
        return self.first <= frame <= self.last


@dataclass(frozen=True)
class CountCurve:
    raw: tuple[int, ...]
    filtered: tuple[int, ...]

    @classmethod
    def from_counts(cls, raw: Sequence[int], median_window: int = 5) -> CountCurve:
        return cls(tuple(int(c) for c in raw), tuple(median_filter(raw, median_window)))

    def __len__(self) -> int:
        return len(self.raw)


def median_filter(raw: Sequence[int], w_median: int) -> list[int]:
    """1-D median filter with replicated edges."""
    if w_median < 1 or w_median % 2 == 0:
        raise ConfigError(f"median window must be odd and >= 1, got {w_median}")
    values = np.asarray(raw, dtype=np.int64)
    if values.size == 0 or w_median == 1:
        return values.tolist()
    half = w_median // 2
    padded = np.pad(values, half, mode="edge")
    # odd window over integers -> the median is itself one of the samples
    return np.median(sliding_window_view(padded, w_median), axis=1).astype(np.int64).tolist()


def gradient(filtered: Sequence[int], t: int, delta: int = 1) -> float:
    """|M_t - M_{t+delta}| / delta with 1-based frame ``t``."""
    if delta < 1 or not 1 <= t <= len(filtered) - delta:
        raise IndexError(f"t={t} outside 1..{len(filtered) - delta} for delta={delta}")
    return abs(filtered[t - 1] - filtered[t - 1 + delta]) / delta


def band_cuts(filtered: Sequence[int], band: float) -> list[tuple[int, int]]:
    """Frame ranges produced by the running-band rule alone."""
    pieces: list[tuple[int, int]] = []
    if not len(filtered):
        return pieces
    start, lo, hi = 1, filtered[0], filtered[0]
    for t in range(2, len(filtered) + 1):
        m = filtered[t - 1]
        if m - lo < band and hi - m < band:
            lo, hi = min(lo, m), max(hi, m)
        else:
            pieces.append((start, t - 1))
            start, lo, hi = t, m, m
    pieces.append((start, len(filtered)))
    return pieces


def _cap(first: int, last: int, counts: Sequence[int], l_max: int, u: int) -> list[tuple[int, int]]:
    out = []
    a = first
    while a <= last:
        b, total = a, counts[a - 1]
        while b < last and b - a + 1 < l_max and total + counts[b] <= u:
            total += counts[b]
            b += 1
        out.append((a, b))
        a = b + 1
    return out


def partition_adaptive(curve: CountCurve, cfg: Config | None = None) -> list[Subsequence]:
    """Band-based cuts followed by a greedy length/total cap.

    Totals are taken over the raw counts, since the cap bounds the size of
    the downstream clique-partition problems.
    """
    cfg = cfg or Config()
    raw = curve.raw
    subs = []
    for a, b in band_cuts(curve.filtered, cfg.count_band):
        for lo, hi in _cap(a, b, raw, cfg.max_window, cfg.max_window_detections):
            subs.append(Subsequence(lo, hi, int(sum(raw[lo - 1:hi]))))
    return subs


def partition_fixed(
    n_frames: int, length: int, stride: int | None = None, counts: Sequence[int] | None = None
) -> list[Subsequence]:
    """Disjoint windows (stride == length) or a sliding window (stride < length)."""
    stride = length if stride is None else stride
    if length < 1 or stride < 1:
        raise ConfigError("window length and stride must be >= 1")
    if stride > length:
        raise ConfigError(f"stride {stride} exceeds window length {length}")
    if n_frames <= 0:
        return []

    def total(a: int, b: int) -> int:
        return int(sum(counts[a - 1:b])) if counts is not None else 0

    if stride == length or n_frames <= length:
        starts = range(1, n_frames + 1, length)
        return [Subsequence(a, min(a + length - 1, n_frames), total(a, min(a + length - 1, n_frames))) for a in starts]
    starts = list(range(1, n_frames - length + 2, stride))
    if starts[-1] != n_frames - length + 1:
        starts.append(n_frames - length + 1)
    return [Subsequence(a, a + length - 1, total(a, a + length - 1)) for a in starts]


def partition_debug_rows(curve: CountCurve, subs: Sequence[Subsequence]) -> list[tuple[int, int, int, int]]:
    """``(frame, raw, filtered, subseq_id)``; overlapping windows report the first id."""
    rows = []
    owner: dict[int, int] = {}
    for i, s in enumerate(subs):
        for t in range(s.first, s.last + 1):
            owner.setdefault(t, i)
    for t in range(1, len(curve) + 1):
        rows.append((t, curve.raw[t - 1], curve.filtered[t - 1], owner.get(t, -1)))
    return rows


def format_partition_debug(curve: CountCurve, subs: Sequence[Subsequence]) -> str:
    lines = ["frame,raw_count,filtered_count,subseq_id\n"]
    lines += [f"{t},{r},{f},{i}\n" for t, r, f, i in partition_debug_rows(curve, subs)]
    return "".join(lines)
