"""Deterministic synthetic conversations and embedding clouds with known truth.

Randomness comes from numpy's PCG64 bit generator seeded with ``cfg.seed``:
the reference timeline uses ``PCG64(seed)`` and embeddings use
``PCG64(seed).jumped()``, so changing the windowing never perturbs the
timeline or the speaker means. All times are rounded to the 1 ms grid.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .embed_store import EmbeddingSet
from .errors import BadConfig
from .rttm_io import Diarization, SpeakerTurn
from .timeline import SegmentationConfig, TimedSegment, intersect_segments, uniform_segment, union_segments


@dataclass(frozen=True)
class SynthConfig:
    n_speakers: int = 3
    duration: float = 300.0
    turn_range: tuple[float, float] = (1.5, 8.0)
    pause_range: tuple[float, float] = (0.1, 1.0)
    overlap_prob: float = 0.1
    overlap_range: tuple[float, float] = (0.3, 1.2)
    dim: int = 32
    separation: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.n_speakers < 1:
            raise BadConfig("n_speakers", "must be >= 1")
        if self.duration <= 0:
            raise BadConfig("duration", "must be > 0")
        for name in ("turn_range", "pause_range", "overlap_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise BadConfig(name, "must be an ordered non-negative (min, max) pair")
        if self.turn_range[0] <= 0:
            raise BadConfig("turn_range", "minimum turn length must be > 0")
        if not 0 <= self.overlap_prob <= 1:
            raise BadConfig("overlap_prob", "must lie in [0, 1]")
        if self.dim < 1:
            raise BadConfig("dim", "must be >= 1")
        if self.separation < 0:
            raise BadConfig("separation", "must be >= 0")

    @property
    def within_std(self) -> float:
        return 1.0 / np.sqrt(self.dim)

    def speaker_names(self) -> list[str]:
        return [f"spk{i}" for i in range(self.n_speakers)]


def _ms(x: float) -> float:
    return round(float(x), 3)


def gen_reference(cfg: SynthConfig, recording_id: str = "rec"):
    """Round-robin conversation; returns (reference, overlap regions, speech timeline)."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    names = cfg.speaker_names()
    turns: list[tuple[float, float, int]] = []
    overlaps = []
    t_prev_off = _ms(rng.uniform(*cfg.pause_range))
    i = 0
    while True:
        dur = rng.uniform(*cfg.turn_range)
        pause = rng.uniform(*cfg.pause_range)
        coin = rng.random()
        amount = rng.uniform(*cfg.overlap_range)
        spk = i % cfg.n_speakers
        onset = _ms(t_prev_off + pause) if turns else t_prev_off
        if turns and cfg.n_speakers > 1 and coin < cfg.overlap_prob:
            p_on, p_off, _ = turns[-1]
            floor = max(p_on, turns[-2][1]) if len(turns) > 1 else p_on
            # stay clear of the turn before the previous one: at most two talkers at once
            amount = min(amount, 0.9 * (p_off - floor))
            if amount >= 0.05:
                onset = _ms(p_off - amount)
        offset = _ms(onset + max(dur, (turns[-1][1] - onset + 0.1) if turns else dur))
        if offset > cfg.duration:
            offset = _ms(cfg.duration)
            if offset - onset < cfg.turn_range[0] or (turns and offset <= turns[-1][1]):
                break
        if turns and onset < turns[-1][1]:
            overlaps.append(TimedSegment(onset, turns[-1][1]))
        turns.append((onset, offset, spk))
        t_prev_off = offset
        if offset >= cfg.duration:
            break
        i += 1
    ref = Diarization([SpeakerTurn(recording_id, on, _ms(off - on), names[s]) for on, off, s in turns])
    speech = union_segments(TimedSegment(on, off) for on, off, _ in turns)
    return ref, overlaps, speech


def speaker_means(rng: np.random.Generator, n: int, dim: int, separation: float) -> np.ndarray:
    """Uniform directions, scaled so the closest pair sits ``separation`` within-stds apart."""
    u = rng.standard_normal((n, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if n == 1:
        return u * (separation / np.sqrt(dim) if separation else 0.0)
    d = np.linalg.norm(u[:, None, :] - u[None, :, :], axis=2)
    d_min = d[np.triu_indices(n, 1)].min()
    return u * (separation / np.sqrt(dim) / d_min)


def gen_embeddings(reference: Diarization, seg: SegmentationConfig, cfg: SynthConfig):
    """Window embeddings for one synthetic recording; returns (set, majority-speaker labels)."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed).jumped())
    names = cfg.speaker_names()
    means = speaker_means(rng, cfg.n_speakers, cfg.dim, cfg.separation)
    recs = reference.recordings
    rec = recs[0] if recs else "rec"
    by_spk = reference.by_speaker()
    spk_segs = [union_segments(by_spk.get(name, [])) for name in names]
    windows = uniform_segment(reference.speech(), seg)
    noise = rng.standard_normal((len(windows), cfg.dim)) * cfg.within_std
    vectors = np.empty((len(windows), cfg.dim))
    labels = []
    for w_i, win in enumerate(windows):
        durs = np.array([sum(s.duration for s in intersect_segments([win], segs)) for segs in spk_segs])
        major = int(np.argmax(durs))
        labels.append(names[major])
        active = np.flatnonzero(durs > 0)
        if len(active) > 1 and _has_overlap(win, [spk_segs[a] for a in active]):
            mean = (durs[active, None] * means[active]).sum(axis=0) / durs[active].sum()
        else:
            mean = means[major]
        vectors[w_i] = mean + noise[w_i]
    return EmbeddingSet([rec] * len(windows), windows, vectors, cfg.dim), labels


def _has_overlap(win, seg_lists) -> bool:
    for a in range(len(seg_lists)):
        for b in range(a + 1, len(seg_lists)):
            if intersect_segments(intersect_segments([win], seg_lists[a]), seg_lists[b]):
                return True
    return False


def gen_training_set(cfg: SynthConfig, n_recordings: int = 200, samples_per_speaker: int = 20,
                     speakers: tuple[int, int] = (2, 5)):
    """Labelled embeddings from many independent synthetic conversations (for PLDA/LDA fitting)."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    recs, wins, vecs, labels = [], [], [], []
    for j in range(n_recordings):
        n = int(rng.integers(speakers[0], speakers[1] + 1))
        means = speaker_means(rng, n, cfg.dim, cfg.separation)
        x = means[np.repeat(np.arange(n), samples_per_speaker)]
        x = x + rng.standard_normal(x.shape) * cfg.within_std
        for i, row in enumerate(x):
            recs.append(f"train{j:04d}")
            wins.append(TimedSegment(round(i * 1.0, 3), round(i * 1.0 + 1.44, 3)))
            labels.append(f"train{j:04d}_s{i // samples_per_speaker}")
            vecs.append(row)
    return EmbeddingSet(recs, wins, np.array(vecs), cfg.dim), labels


def corpus_config(seed: int, base: SynthConfig = SynthConfig(), speakers: tuple[int, int] = (2, 5)) -> SynthConfig:
    """Per-recording config with the speaker count drawn deterministically from the seed."""
    n = int(np.random.Generator(np.random.PCG64(seed).jumped(2)).integers(speakers[0], speakers[1] + 1))
    return replace(base, n_speakers=n, seed=seed)


@dataclass
class SynthCorpus:
    """Several synthetic recordings; ``embeddings`` and ``labels`` are keyed by window shift."""

    reference: Diarization
    overlaps: dict[str, list[TimedSegment]]
    speech: dict[str, list[TimedSegment]]
    embeddings: dict[float, EmbeddingSet]
    labels: dict[float, list[str]]
    configs: dict[str, SynthConfig]


def recording_name(seed: int) -> str:
    return f"rec{seed:04d}"


def gen_corpus(seeds, base: SynthConfig = SynthConfig(), speakers: tuple[int, int] | None = (2, 5),
               shifts=(0.24,), window: float = 1.44) -> SynthCorpus:
    """One recording per seed. With ``speakers=None`` every recording uses ``base.n_speakers``."""
    refs, overlaps, speech, configs = [], {}, {}, {}
    per_shift = {sh: ([], []) for sh in shifts}
    # visiting recordings in name order keeps labels aligned with the sorted embedding set
    for seed in sorted(seeds, key=recording_name):
        cfg = corpus_config(seed, base, speakers) if speakers else replace(base, seed=seed)
        rec = recording_name(seed)
        ref, ov, sp = gen_reference(cfg, rec)
        refs.append(ref)
        overlaps[rec], speech[rec], configs[rec] = ov, sp, cfg
        for sh in shifts:
            es, labels = gen_embeddings(ref, SegmentationConfig(window, sh), cfg)
            # speaker names are only unique within a recording
            per_shift[sh][0].append(es)
            per_shift[sh][1].extend(f"{rec}_{lab}" for lab in labels)
    embeddings, labels = {}, {}
    for sh, (sets, labs) in per_shift.items():
        embeddings[sh] = _concat_sets(sets)
        labels[sh] = labs
    return SynthCorpus(Diarization.concat(refs), overlaps, speech, embeddings, labels, configs)


def _concat_sets(sets: list[EmbeddingSet]) -> EmbeddingSet:
    recs = [r for es in sets for r in es.recording_ids]
    wins = [w for es in sets for w in es.windows]
    dim = sets[0].dim if sets else 0
    vecs = np.concatenate([es.vectors for es in sets]) if sets else np.zeros((0, dim))
    return EmbeddingSet(recs, wins, vecs, dim)
