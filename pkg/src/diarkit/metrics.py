"""DER, JER and VAD error with optimal speaker mapping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NoReferenceSpeech
from .rttm_io import Diarization, Uem
from .timeline import TimedSegment, intersect_segments, subtract_segments, total_duration, union_segments


@dataclass(frozen=True)
class ScoringConfig:
    collar: float = 0.25
    score_overlap: bool = True
    jer_collar: float = 0.0

    def __post_init__(self):
        if self.collar < 0 or self.jer_collar < 0:
            raise ValueError("collars must be non-negative")


@dataclass
class DiarizationMetrics:
    miss: float = 0.0
    falarm: float = 0.0
    confusion: float = 0.0
    total_speech: float = 0.0
    der: float = 0.0
    jer: float = 0.0
    mapping: dict = field(default_factory=dict)
    flag: str | None = None
    per_recording: dict = field(default_factory=dict)


_SNAP = 9  # boundaries are compared on a 1 ns grid so float residue cannot open sliver regions


def _snap(t: float) -> float:
    return round(t, _SNAP)


class _Regions:
    """Atomic regions between consecutive time boundaries with per-speaker activity."""

    def __init__(self, ref: dict, hyp: dict, extra_bounds):
        self.ref_names = sorted(ref)
        self.hyp_names = sorted(hyp)
        bounds = {_snap(b) for b in extra_bounds}
        for segs in list(ref.values()) + list(hyp.values()):
            for s in segs:
                bounds.add(_snap(s.onset))
                bounds.add(_snap(s.offset))
        self.bounds = np.array(sorted(bounds))
        n = max(len(self.bounds) - 1, 0)
        self.dur = np.diff(self.bounds) if n else np.zeros(0)
        self.R = self._activity(ref, self.ref_names, n)
        self.H = self._activity(hyp, self.hyp_names, n)

    def _activity(self, spk_segs, names, n):
        act = np.zeros((n, len(names)), dtype=bool)
        for j, name in enumerate(names):
            for s in spk_segs[name]:
                i0 = np.searchsorted(self.bounds, _snap(s.onset))
                i1 = np.searchsorted(self.bounds, _snap(s.offset))
                act[i0:i1, j] = True
        return act

    def mask(self, segments) -> np.ndarray:
        m = np.zeros(len(self.dur), dtype=bool)
        for s in segments:
            i0 = np.searchsorted(self.bounds, _snap(s.onset))
            i1 = np.searchsorted(self.bounds, _snap(s.offset))
            m[i0:i1] = True
        return m


def collar_zones(ref: Diarization, collar: float) -> list[TimedSegment]:
    if collar <= 0:
        return []
    zones = []
    for t in ref.turns:
        for b in (t.onset, t.offset):
            lo, hi = max(0.0, b - collar), b + collar
            if hi > lo:  # a collar below float resolution at b is no collar
                zones.append(TimedSegment(lo, hi))
    return union_segments(zones)


def optimal_mapping(cooc: np.ndarray) -> list[tuple[int, int]]:
    """Partial bijection maximising total co-occurrence; zero-overlap pairs are left unmapped."""
    if cooc.size == 0:
        return []
    # integer nanoseconds: tied mappings stay tied, so the choice depends on name order only
    cooc = np.round(cooc * 10 ** _SNAP)
    rows, cols = linear_sum_assignment(cooc, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if cooc[r, c] > 0]


def default_uem(ref: Diarization) -> list[TimedSegment]:
    if not ref.turns:
        return []
    return [TimedSegment(0.0, max(t.offset for t in ref.turns))]


def score_recording(ref: Diarization, hyp: Diarization, uem_regions=None,
                    cfg: ScoringConfig = ScoringConfig()) -> DiarizationMetrics:
    """Score a single recording's reference against its hypothesis."""
    regions_uem = union_segments(uem_regions) if uem_regions is not None else default_uem(ref)
    scored = subtract_segments(regions_uem, collar_zones(ref, cfg.collar))
    jer_scored = subtract_segments(regions_uem, collar_zones(ref, cfg.jer_collar))
    ref_spk = {k: union_segments(v) for k, v in ref.by_speaker().items()}
    hyp_spk = {k: union_segments(v) for k, v in hyp.by_speaker().items()}
    extra = [b for s in scored + jer_scored + regions_uem for b in (s.onset, s.offset)]
    reg = _Regions(ref_spk, hyp_spk, extra)
    R, H, dur = reg.R, reg.H, reg.dur
    m = reg.mask(scored)
    nr = R.sum(axis=1)
    if not cfg.score_overlap:
        m &= nr < 2
    w = dur * m
    cooc = R.T.astype(float) @ (H * w[:, None]) if len(dur) else np.zeros((len(reg.ref_names), len(reg.hyp_names)))
    pairs = optimal_mapping(cooc)
    nh = H.sum(axis=1)
    correct = np.zeros(len(dur))
    for r, h in pairs:
        correct += R[:, r] & H[:, h]
    miss = math.fsum(w * np.maximum(nr - nh, 0))
    fa = math.fsum(w * np.maximum(nh - nr, 0))
    conf = math.fsum(w * (np.minimum(nr, nh) - correct))
    total = math.fsum(w * nr)
    out = DiarizationMetrics(miss, fa, conf, total)
    out.mapping = {reg.ref_names[r]: reg.hyp_names[h] for r, h in pairs}
    if total > 0:
        out.der = (miss + fa + conf) / total
    elif fa > 0:
        out.der, out.flag = math.inf, NoReferenceSpeech.__name__
    # JER over the (optionally collared) UEM, sharing the DER mapping
    jm = reg.mask(jer_scored)
    jw = dur * jm
    mapped = dict(pairs)
    per_spk = []
    for r in range(len(reg.ref_names)):
        if r in mapped:
            h = mapped[r]
            inter = math.fsum(jw * (R[:, r] & H[:, h]))
            union = math.fsum(jw * (R[:, r] | H[:, h]))
            per_spk.append(1.0 - inter / union if union > 0 else 0.0)
        elif math.fsum(jw * R[:, r]) > 0:
            per_spk.append(1.0)
    if per_spk:
        out.jer = math.fsum(per_spk) / len(per_spk)
    else:
        out.jer = 1.0 if math.fsum(jw * (nh > 0)) > 0 else 0.0
    return out


def _recordings(ref: Diarization, hyp: Diarization, uem: Uem | None) -> list[str]:
    if uem is not None and uem.regions:
        return sorted(set(uem.regions) | set(ref.recordings))
    return ref.recordings


def der(ref: Diarization, hyp: Diarization, uem: Uem | None = None,
        cfg: ScoringConfig = ScoringConfig()) -> DiarizationMetrics:
    """Corpus-level scores; per-recording results are kept in ``per_recording``."""
    total = DiarizationMetrics()
    weights = []
    for rec in _recordings(ref, hyp, uem):
        regions = uem.get(rec) if uem is not None else None
        m = score_recording(ref.for_recording(rec), hyp.for_recording(rec), regions, cfg)
        total.per_recording[rec] = m
        total.mapping[rec] = m.mapping
        total.miss += m.miss
        total.falarm += m.falarm
        total.confusion += m.confusion
        total.total_speech += m.total_speech
        weights.append((m.total_speech, m.jer))
    err = total.miss + total.falarm + total.confusion
    if total.total_speech > 0:
        total.der = err / total.total_speech
        total.jer = math.fsum(w * j for w, j in weights) / total.total_speech
    elif err > 0:
        total.der, total.flag, total.jer = math.inf, NoReferenceSpeech.__name__, 1.0
    return total


def jer(ref: Diarization, hyp: Diarization, uem: Uem | None = None,
        cfg: ScoringConfig = ScoringConfig()) -> float:
    return der(ref, hyp, uem, cfg).jer


def vad_error(ref_speech, hyp_speech, uem=None) -> tuple[float, float, float]:
    """(miss %, false alarm %, total %) of a speech/non-speech timeline, relative to reference speech."""
    ref = union_segments(ref_speech)
    hyp = union_segments(hyp_speech)
    if uem is not None:
        region = union_segments(uem)
        ref = intersect_segments(ref, region)
        hyp = intersect_segments(hyp, region)
    ref_dur = total_duration(ref)
    if ref_dur <= 0:
        raise NoReferenceSpeech("reference timeline has no speech")
    miss = 100.0 * total_duration(subtract_segments(ref, hyp)) / ref_dur
    fa = 100.0 * total_duration(subtract_segments(hyp, ref)) / ref_dur
    return miss, fa, miss + fa
