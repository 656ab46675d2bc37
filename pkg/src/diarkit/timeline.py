"""Timeline algebra: interval sets, VAD post-processing, uniform windowing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import UnsortedInput

_EPS = 1e-9


@dataclass(frozen=True, order=True)
class TimedSegment:
    onset: float
    offset: float

    def __post_init__(self):
        if not (0 <= self.onset < self.offset):
            raise ValueError(f"invalid segment ({self.onset}, {self.offset})")

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    def overlaps(self, other: "TimedSegment") -> bool:
        return self.onset < other.offset and other.onset < self.offset

    def __iter__(self):
        return iter((self.onset, self.offset))


@dataclass(frozen=True)
class VadPostConfig:
    max_gap: float = 0.7
    min_region: float = 0.0

    def __post_init__(self):
        if self.max_gap < 0 or self.min_region < 0:
            raise ValueError("max_gap and min_region must be non-negative")


@dataclass(frozen=True)
class SegmentationConfig:
    window: float = 1.44
    shift: float = 0.24

    def __post_init__(self):
        if not (0 < self.shift <= self.window):
            raise ValueError("require 0 < shift <= window")


SHIFT_PRESETS = (0.24, 0.18)


def _as_segment(s) -> TimedSegment:
    return s if isinstance(s, TimedSegment) else TimedSegment(*s)


def check_sorted_disjoint(segments: Sequence[TimedSegment]) -> None:
    for prev, cur in zip(segments, segments[1:]):
        if cur.onset < prev.offset:
            raise UnsortedInput(f"segments not sorted/disjoint at {prev} -> {cur}")


def union_segments(segments: Iterable) -> list[TimedSegment]:
    """Sorted union; touching segments are joined."""
    segs = sorted(_as_segment(s) for s in segments)
    out: list[list[float]] = []
    for s in segs:
        if out and s.onset <= out[-1][1]:
            out[-1][1] = max(out[-1][1], s.offset)
        else:
            out.append([s.onset, s.offset])
    return [TimedSegment(a, b) for a, b in out]


def intersect_segments(a: Sequence[TimedSegment], b: Sequence[TimedSegment]) -> list[TimedSegment]:
    """Intersection of two sorted disjoint lists."""
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i].onset, b[j].onset)
        hi = min(a[i].offset, b[j].offset)
        if lo < hi:
            out.append(TimedSegment(lo, hi))
        if a[i].offset < b[j].offset:
            i += 1
        else:
            j += 1
    return out


def subtract_segments(a: Sequence[TimedSegment], b: Sequence[TimedSegment]) -> list[TimedSegment]:
    """``a`` minus ``b``; both sorted disjoint."""
    out = []
    j = 0
    for seg in a:
        lo = seg.onset
        while j < len(b) and b[j].offset <= lo:
            j += 1
        k = j
        while k < len(b) and b[k].onset < seg.offset:
            if b[k].onset > lo:
                out.append(TimedSegment(lo, b[k].onset))
            lo = max(lo, b[k].offset)
            k += 1
        if lo < seg.offset:
            out.append(TimedSegment(lo, seg.offset))
    return out


def total_duration(segments: Iterable[TimedSegment]) -> float:
    return math.fsum(s.duration for s in segments)


def merge_gaps(segments: Sequence, max_gap: float) -> list[TimedSegment]:
    """Join consecutive segments separated by a gap strictly shorter than ``max_gap``."""
    segs = [_as_segment(s) for s in segments]
    check_sorted_disjoint(segs)
    out: list[list[float]] = []
    for s in segs:
        if out and s.onset - out[-1][1] < max_gap:
            out[-1][1] = s.offset
        else:
            out.append([s.onset, s.offset])
    return [TimedSegment(a, b) for a, b in out]


def drop_short(segments: Sequence, min_region: float) -> list[TimedSegment]:
    return [s for s in map(_as_segment, segments) if s.duration >= min_region]


def vad_postprocess(segments: Sequence, cfg: VadPostConfig = VadPostConfig()) -> list[TimedSegment]:
    """Gap filling followed by short-region removal."""
    return drop_short(merge_gaps(segments, cfg.max_gap), cfg.min_region)


def uniform_segment(speech: Sequence, cfg: SegmentationConfig = SegmentationConfig()) -> list[TimedSegment]:
    """Cut each speech segment into fixed windows at a fixed shift.

    Segments no longer than the window are kept whole. A flush window ending at
    the segment offset is added when the uncovered tail exceeds the shift.
    """
    segs = [_as_segment(s) for s in speech]
    check_sorted_disjoint(segs)
    w, sh = cfg.window, cfg.shift
    out = []
    for seg in segs:
        length = seg.duration
        if length <= w + _EPS:
            out.append(seg)
            continue
        n = int(math.floor((length - w) / sh + _EPS)) + 1
        for i in range(n):
            on = seg.onset + i * sh
            out.append(TimedSegment(on, min(on + w, seg.offset)))
        last_off = seg.onset + (n - 1) * sh + w
        if seg.offset - last_off > sh + _EPS:
            out.append(TimedSegment(seg.offset - w, seg.offset))
    return out


def windows_to_segments(windows: Sequence[TimedSegment], labels: Sequence) -> list[tuple[float, float, object]]:
    """Turn labelled (possibly overlapping) windows into contiguous labelled pieces.

    Overlapping neighbours split their shared span at its midpoint; adjacent
    pieces carrying the same label are joined.
    """
    pieces: list[list] = []
    n = len(windows)
    for i, (win, lab) in enumerate(zip(windows, labels)):
        start, end = win.onset, win.offset
        if i > 0 and windows[i - 1].offset > win.onset:
            start = 0.5 * (win.onset + windows[i - 1].offset)
        if i + 1 < n and windows[i + 1].onset < win.offset:
            end = 0.5 * (windows[i + 1].onset + win.offset)
        if end <= start:
            continue
        if pieces and pieces[-1][2] == lab and abs(pieces[-1][1] - start) < _EPS:
            pieces[-1][1] = end
        else:
            pieces.append([start, end, lab])
    return [tuple(p) for p in pieces]
