"""Reading and writing RTTM, UEM and overlap-region files."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable

from .errors import MalformedLine
from .timeline import TimedSegment, union_segments

_MS = Decimal("0.001")


@dataclass(frozen=True)
class SpeakerTurn:
    recording_id: str
    onset: float
    duration: float
    speaker: str

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"turn duration must be positive, got {self.duration}")
        if not self.onset >= 0:
            raise ValueError(f"turn onset must be non-negative, got {self.onset}")
        if not self.speaker or any(c.isspace() for c in self.speaker):
            raise ValueError(f"invalid speaker label {self.speaker!r}")

    @property
    def offset(self) -> float:
        return self.onset + self.duration

    @property
    def segment(self) -> TimedSegment:
        return TimedSegment(self.onset, self.offset)


def _turn_key(t: SpeakerTurn):
    return (t.recording_id, t.onset, t.speaker, t.duration)


@dataclass
class Diarization:
    """All speaker turns of one or more recordings, kept sorted."""

    turns: list[SpeakerTurn] = field(default_factory=list)

    def __post_init__(self):
        self.turns = sorted(self.turns, key=_turn_key)

    def __len__(self):
        return len(self.turns)

    def __iter__(self):
        return iter(self.turns)

    @property
    def recordings(self) -> list[str]:
        return sorted({t.recording_id for t in self.turns})

    def for_recording(self, recording_id: str) -> "Diarization":
        return Diarization([t for t in self.turns if t.recording_id == recording_id])

    def speakers(self) -> list[str]:
        return sorted({t.speaker for t in self.turns})

    def by_speaker(self) -> dict[str, list[TimedSegment]]:
        out: dict[str, list[TimedSegment]] = {}
        for t in self.turns:
            out.setdefault(t.speaker, []).append(t.segment)
        return out

    def speech(self) -> list[TimedSegment]:
        return union_segments(t.segment for t in self.turns)

    @classmethod
    def concat(cls, parts: Iterable["Diarization"]) -> "Diarization":
        return cls([t for p in parts for t in p.turns])


@dataclass
class Uem:
    regions: dict[str, list[TimedSegment]] = field(default_factory=dict)

    def get(self, recording_id, default=None):
        return self.regions.get(recording_id, default)

    def __contains__(self, recording_id):
        return recording_id in self.regions


def format_time(x: float) -> str:
    """Fixed 3-decimal rendering, halves rounded away from zero."""
    return str(Decimal(repr(float(x))).quantize(_MS, rounding=ROUND_HALF_UP))


def _lines(text):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return text.splitlines()


def _real(token, line_no, what):
    try:
        value = float(token)
    except ValueError:
        raise MalformedLine(line_no, f"non-numeric {what} {token!r}") from None
    if not math.isfinite(value):
        raise MalformedLine(line_no, f"non-finite {what}")
    return value


def parse_rttm(text) -> Diarization:
    turns = []
    for line_no, line in enumerate(_lines(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";;"):
            continue
        fields = stripped.split()
        if len(fields) < 10:
            raise MalformedLine(line_no, f"expected 10 fields, got {len(fields)}")
        if fields[0] != "SPEAKER":
            raise MalformedLine(line_no, f"unsupported record type {fields[0]!r}")
        onset = _real(fields[3], line_no, "onset")
        duration = _real(fields[4], line_no, "duration")
        if duration <= 0:
            raise MalformedLine(line_no, "duration must be positive")
        if onset < 0:
            raise MalformedLine(line_no, "onset must be non-negative")
        turns.append(SpeakerTurn(fields[1], onset, duration, fields[7]))
    return Diarization(turns)


def write_rttm(d: Diarization) -> bytes:
    out = []
    for t in d.turns:
        out.append(
            f"SPEAKER {t.recording_id} 1 {format_time(t.onset)} {format_time(t.duration)} "
            f"<NA> <NA> {t.speaker} <NA> <NA>\n"
        )
    return "".join(out).encode("utf-8")


def _parse_regions(text, n_fields, time_cols):
    regions: dict[str, list[TimedSegment]] = {}
    for line_no, line in enumerate(_lines(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";;"):
            continue
        fields = stripped.split()
        if len(fields) != n_fields:
            raise MalformedLine(line_no, f"expected {n_fields} fields, got {len(fields)}")
        onset = _real(fields[time_cols[0]], line_no, "onset")
        offset = _real(fields[time_cols[1]], line_no, "offset")
        if onset < 0:
            raise MalformedLine(line_no, "onset must be non-negative")
        if offset <= onset:
            raise MalformedLine(line_no, "offset must exceed onset")
        regions.setdefault(fields[0], []).append(TimedSegment(onset, offset))
    return {rec: union_segments(segs) for rec, segs in sorted(regions.items())}


def parse_uem(text) -> Uem:
    """UEM lines are ``rec channel onset offset``; overlapping regions are merged."""
    return Uem(_parse_regions(text, 4, (2, 3)))


def parse_overlaps(text) -> dict[str, list[TimedSegment]]:
    """Overlap lists are ``rec onset offset`` lines."""
    return _parse_regions(text, 3, (1, 2))


def write_uem(uem: Uem) -> bytes:
    lines = []
    for rec in sorted(uem.regions):
        for seg in uem.regions[rec]:
            lines.append(f"{rec} 1 {format_time(seg.onset)} {format_time(seg.offset)}\n")
    return "".join(lines).encode("utf-8")


def write_overlaps(overlaps: dict[str, list[TimedSegment]]) -> bytes:
    lines = []
    for rec in sorted(overlaps):
        for seg in overlaps[rec]:
            lines.append(f"{rec} {format_time(seg.onset)} {format_time(seg.offset)}\n")
    return "".join(lines).encode("utf-8")
