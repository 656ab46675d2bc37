"""Small synthetic fixtures shared across test modules."""
from functools import lru_cache

import numpy as np

from diarkit.embed_store import EmbeddingSet
from diarkit.plda import fit_plda
from diarkit.synth import SynthConfig, gen_embeddings, gen_reference, gen_training_set
from diarkit.timeline import SegmentationConfig, TimedSegment


@lru_cache(maxsize=None)
def plda_model(dim=32, separation=6.0):
    train, labels = gen_training_set(SynthConfig(dim=dim, separation=separation, seed=999), n_recordings=200)
    return fit_plda(train, labels)


def recording(seed, n_speakers, duration=120.0, separation=6.0, shift=0.24, **kw):
    cfg = SynthConfig(n_speakers=n_speakers, duration=duration, separation=separation, seed=seed, **kw)
    ref, overlaps, speech = gen_reference(cfg, "r")
    es, labels = gen_embeddings(ref, SegmentationConfig(1.44, shift), cfg)
    return es, np.array(labels), ref, overlaps


def sequence_set(vectors, rec="r"):
    wins = [TimedSegment(round(i * 0.24, 3), round(i * 0.24 + 1.44, 3)) for i in range(len(vectors))]
    return EmbeddingSet([rec] * len(vectors), wins, np.asarray(vectors, dtype=float))
