"""Second-speaker assignment inside externally detected overlap regions."""
from __future__ import annotations

from .errors import UnknownRecording
from .rttm_io import Diarization, SpeakerTurn
from .timeline import TimedSegment, intersect_segments, subtract_segments, total_duration, union_segments


def _covered_by_two(pieces, spk_cov: dict) -> bool:
    """True if at least two distinct speakers are active at every instant of ``pieces``."""
    bounds = sorted({b for p in pieces for b in p} | {b for segs in spk_cov.values() for s in segs for b in s})
    for lo, hi in zip(bounds, bounds[1:]):
        mid = 0.5 * (lo + hi)
        if not any(p.onset <= mid < p.offset for p in pieces):
            continue
        active = sum(any(s.onset <= mid < s.offset for s in segs) for segs in spk_cov.values())
        if active < 2:
            return False
    return True


def _distance(turn: SpeakerTurn, region: TimedSegment) -> float:
    return max(0.0, turn.onset - region.offset, region.onset - turn.offset)


def _assign_recording(d: Diarization, regions) -> list[SpeakerTurn]:
    rec = d.turns[0].recording_id
    by_spk = {k: union_segments(v) for k, v in d.by_speaker().items()}
    speech = d.speech()
    added = []
    for region in union_segments(regions):
        pieces = intersect_segments([region], speech)
        if not pieces:
            continue
        cov = {k: intersect_segments(pieces, v) for k, v in by_spk.items()}
        cov = {k: v for k, v in cov.items() if v}
        if _covered_by_two(pieces, cov):
            continue
        primary = min(cov, key=lambda k: (-total_duration(cov[k]), k))
        candidates = [t for t in d.turns if t.speaker != primary]
        if not candidates:
            continue
        # nearest turn of another speaker; on equal distance the earlier (preceding) turn wins
        nearest = min(candidates, key=lambda t: (_distance(t, region), t.onset >= region.onset, -t.offset, t.speaker))
        for spk in (nearest.speaker, primary):
            for seg in subtract_segments(pieces, by_spk.get(spk, [])):
                # output lives on the 1 ms grid; float residue below it is not a gap
                on, off = round(seg.onset, 3), round(seg.offset, 3)
                if off > on:
                    added.append(SpeakerTurn(rec, on, round(off - on, 3), spk))
    return added


def assign_overlap(d: Diarization, overlaps: dict) -> Diarization:
    """Make both the dominant speaker and the nearest other speaker active over each overlap region.

    Regions are clipped to existing speech; regions already covered by two
    speakers, and recordings with a single speaker, are left untouched.
    Existing turns are never modified.
    """
    recordings = set(d.recordings)
    unknown = sorted(set(overlaps) - recordings)
    if unknown:
        raise UnknownRecording(f"overlap regions for unknown recordings: {unknown[:5]}")
    added = []
    for rec in sorted(overlaps):
        added += _assign_recording(d.for_recording(rec), overlaps[rec])
    return Diarization(d.turns + added)
