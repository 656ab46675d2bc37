"""DOVER-Lap fusion: global label mapping over a cost tensor, then weighted voting."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import RecordingMismatch
from .rttm_io import Diarization, SpeakerTurn
from .timeline import intersect_segments, total_duration, union_segments

TENSOR_LIMIT = 10 ** 5


@dataclass(frozen=True)
class FusionConfig:
    rank_alpha: float = 0.0

    def __post_init__(self):
        if self.rank_alpha < 0:
            raise ValueError("rank_alpha must be >= 0")


def _speaker_segments(h: Diarization) -> dict:
    return {k: union_segments(v) for k, v in h.by_speaker().items()}


def pairwise_cooccurrence(hyps: list[Diarization]):
    """Per-hypothesis sorted labels and co-occurrence duration matrices for every hypothesis pair."""
    segs = [_speaker_segments(h) for h in hyps]
    names = [sorted(s) for s in segs]
    cooc = {}
    for a, b in itertools.combinations(range(len(hyps)), 2):
        m = np.zeros((len(names[a]), len(names[b])))
        for i, x in enumerate(names[a]):
            for j, y in enumerate(names[b]):
                m[i, j] = total_duration(intersect_segments(segs[a][x], segs[b][y]))
        cooc[a, b] = m
    return names, cooc


def _check_recording(hyps):
    recs = {r for h in hyps for r in h.recordings}
    if len(recs) > 1:
        raise RecordingMismatch(f"fusion inputs span several recordings: {sorted(recs)}")


def _tensor_groups(names, cooc):
    """Greedy selection of the cheapest label tuple from the full cost tensor."""
    K = len(names)
    shape = tuple(len(n) + 1 for n in names)  # last index on each axis = no label
    cost = np.zeros(shape)
    for (a, b), m in cooc.items():
        pad = np.zeros((shape[a], shape[b]))
        pad[:-1, :-1] = -m
        view = [1] * K
        view[a], view[b] = shape[a], shape[b]
        cost = cost + pad.reshape(view)
    cost[tuple(s - 1 for s in shape)] = np.inf
    present = np.zeros(shape, dtype=int)
    for a in range(K):
        view = [1] * K
        view[a] = shape[a]
        present = present + (np.arange(shape[a]) < shape[a] - 1).reshape(view)
    groups = []
    remaining = sum(len(n) for n in names)
    while remaining:
        best = cost.min()
        cand = np.argwhere(cost == best)
        counts = present[tuple(cand.T)]
        pick = cand[np.flatnonzero(counts == counts.min())[0]]
        group = []
        for a, idx in enumerate(pick):
            if idx < shape[a] - 1:
                group.append((a, int(idx)))
                sl = [slice(None)] * K
                sl[a] = int(idx)
                cost[tuple(sl)] = np.inf
                remaining -= 1
        groups.append(group)
    return groups


def _greedy_groups(names, cooc):
    """Commit the cheapest pairing of an unassigned (hypothesis, label) with a global label, repeatedly.

    A still-unassigned node counts as a candidate global label of its own, so
    the first commitments pair up nodes. Ties go to the lowest node, then to
    the global label with the lowest first member.
    """
    nodes = [(a, i) for a, n in enumerate(names) for i in range(len(n))]

    def pair_cost(u, v):
        (a, i), (b, j) = sorted([u, v])
        return -cooc[a, b][i, j]

    groups = {u: [u] for u in nodes}  # keyed by first member
    free = set(nodes)
    while True:
        best = None
        for u in sorted(free):
            for key, members in groups.items():
                if key == u or any(v[0] == u[0] for v in members):
                    continue
                c = math.fsum(pair_cost(u, v) for v in members)
                if c < 0 and (best is None or (c, u, key) < best):
                    best = (c, u, key)
        if best is None:
            break
        _, u, key = best
        free.discard(u)
        free.discard(key)
        del groups[u]
        groups[key] = sorted(groups[key] + [u])
        if u < key:
            groups[u] = groups.pop(key)
    return list(groups.values())


def label_groups(hyps: list[Diarization], method: str = "auto"):
    """Group (hypothesis index, label) pairs into shared global speakers."""
    _check_recording(hyps)
    names, cooc = pairwise_cooccurrence(hyps)
    if method == "auto":
        method = "tensor" if math.prod(len(n) + 1 for n in names) <= TENSOR_LIMIT else "greedy"
    if method == "tensor":
        groups = _tensor_groups(names, cooc)
    elif method == "greedy":
        groups = _greedy_groups(names, cooc)
    else:
        raise ValueError(f"unknown label mapping method {method!r}")
    groups = [sorted(g) for g in groups]
    groups.sort()
    return [[(a, names[a][i]) for a, i in g] for g in groups]


def label_map(hyps: list[Diarization], method: str = "auto") -> list[Diarization]:
    """Relabel every hypothesis into a shared label space.

    A global label is named after its member from the lowest-index hypothesis,
    suffixed when that name is already taken.
    """
    groups = label_groups(hyps, method)
    mapping = [dict() for _ in hyps]
    used = set()
    for g in groups:
        name = g[0][1]
        k = 1
        while name in used:
            name = f"{g[0][1]}_{k}"
            k += 1
        used.add(name)
        for a, lab in g:
            mapping[a][lab] = name
    return [
        Diarization([SpeakerTurn(t.recording_id, t.onset, t.duration, mapping[a][t.speaker]) for t in h.turns])
        for a, h in enumerate(hyps)
    ]


def hypothesis_weights(relabeled: list[Diarization], cfg: FusionConfig = FusionConfig()) -> np.ndarray:
    """Weights proportional to rank^-alpha, rank 1 = most agreement with the other hypotheses."""
    K = len(relabeled)
    if cfg.rank_alpha == 0 or K == 1:
        return np.full(K, 1.0 / K)
    segs = [_speaker_segments(h) for h in relabeled]
    agree = np.zeros(K)
    for a, b in itertools.combinations(range(K), 2):
        shared = set(segs[a]) & set(segs[b])
        v = math.fsum(total_duration(intersect_segments(segs[a][s], segs[b][s])) for s in shared)
        agree[a] += v
        agree[b] += v
    order = sorted(range(K), key=lambda i: (-agree[i], i))
    rank = np.empty(K)
    rank[order] = np.arange(1, K + 1)
    w = rank ** (-cfg.rank_alpha)
    return w / w.sum()


def vote(relabeled: list[Diarization], cfg: FusionConfig = FusionConfig(), weights=None) -> Diarization:
    """Weighted per-region voting on speaker count and identities."""
    if not relabeled:
        return Diarization()
    _check_recording(relabeled)
    recs = [r for h in relabeled for r in h.recordings]
    if not recs:
        return Diarization()
    rec = recs[0]
    w = hypothesis_weights(relabeled, cfg) if weights is None else np.asarray(weights, dtype=float)
    segs = [_speaker_segments(h) for h in relabeled]
    # regions are cut on the 1 ms grid that RTTM can represent
    bounds = sorted({round(b, 3) for s in segs for v in s.values() for seg in v for b in seg})
    out: dict[str, list] = {}
    for lo, hi in zip(bounds, bounds[1:]):
        mid = 0.5 * (lo + hi)
        score: dict[str, float] = {}
        expected = 0.0
        for wi, s in zip(w, segs):
            active = [lab for lab, v in s.items() if any(x.onset <= mid < x.offset for x in v)]
            expected += wi * len(active)
            for lab in active:
                score[lab] = score.get(lab, 0.0) + wi
        m = int(math.floor(expected + 0.5 + 1e-9))
        chosen = sorted(score, key=lambda lab: (-score[lab], lab))[:m]
        for lab in chosen:
            runs = out.setdefault(lab, [])
            if runs and abs(runs[-1][1] - lo) < 1e-12:
                runs[-1][1] = hi
            else:
                runs.append([lo, hi])
    turns = [SpeakerTurn(rec, a, round(b - a, 3), lab) for lab, runs in out.items() for a, b in runs]
    return Diarization(turns)


def fuse(hyps: list[Diarization], cfg: FusionConfig = FusionConfig(), method: str = "auto") -> Diarization:
    """Label mapping then voting, recording by recording."""
    recs = sorted({r for h in hyps for r in h.recordings})
    parts = []
    for rec in recs:
        per = [h.for_recording(rec) for h in hyps]
        parts.append(vote(label_map(per, method), cfg))
    return Diarization.concat(parts)
