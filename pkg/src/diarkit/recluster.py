"""Global speaker re-clustering: merge similar speakers, then re-run a clusterer per merged group."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster_ahc import AhcConfig, ahc
from .cluster_nmesc import NmescConfig, nmesc
from .embed_store import EmbeddingSet, center, cosine_affinity, cosine_matrix, length_normalize
from .errors import EmptyInput
from .labels import compact
from .plda import PldaModel
from .vbx import VbxConfig, vbx_run


@dataclass(frozen=True)
class ReclusterConfig:
    merge_threshold: float = 0.0
    inner: str = "vbx"  # "vbx" | "nmesc" | "none"
    scope: str = "group"  # "group": re-run inside each merged group; "global": one run over the recording

    def __post_init__(self):
        if self.inner not in ("vbx", "nmesc", "none"):
            raise ValueError(f"unknown inner clusterer {self.inner!r}")
        if self.scope not in ("group", "global"):
            raise ValueError(f"unknown scope {self.scope!r}")


def speaker_centroids(es: EmbeddingSet, labels) -> np.ndarray:
    """Length-normalised mean vector per cluster id (row k = cluster k)."""
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    out = np.zeros((k, es.dim))
    for c in range(k):
        members = es.vectors[labels == c]
        assert len(members), f"cluster {c} is empty"
        mean = members.mean(axis=0)
        norm = np.linalg.norm(mean)
        out[c] = mean / norm if norm > 0 else mean
    return out


def cosine_input(es: EmbeddingSet) -> EmbeddingSet:
    """Recording-level centering then length normalisation, the cosine back-end's input."""
    return length_normalize(center(es))


def _inner(es, init, cfg, plda, vbx_cfg, nmesc_cfg):
    if cfg.inner == "vbx":
        if plda is None:
            raise ValueError("VBx re-clustering needs a PLDA model")
        labels, _ = vbx_run(es, plda, init, vbx_cfg)
        return labels
    if cfg.inner == "nmesc":
        if len(es) < 2:
            return np.zeros(len(es), dtype=int)
        labels, _ = nmesc(cosine_affinity(cosine_input(es)), nmesc_cfg)
        return labels
    # no inner clusterer: the merged group is one speaker
    return np.zeros(len(es), dtype=int)


def merge_speakers(es: EmbeddingSet, labels, cfg: ReclusterConfig = ReclusterConfig(),
                   plda: PldaModel | None = None, vbx_cfg: VbxConfig = VbxConfig(),
                   nmesc_cfg: NmescConfig = NmescConfig()) -> np.ndarray:
    """Join speakers whose centroids are similar, re-clustering windows of joined speakers."""
    if len(es) == 0:
        raise EmptyInput("no embeddings to re-cluster")
    labels = compact(labels)
    cents = speaker_centroids(es, labels)
    if len(cents) == 1:
        return labels
    groups = ahc(cosine_matrix(cents), AhcConfig(threshold=cfg.merge_threshold))
    merged = groups[labels]
    if len(set(groups.tolist())) == len(cents):
        return labels
    if cfg.scope == "global":
        if cfg.inner == "none":
            return compact(merged)
        init = merged if cfg.inner == "vbx" else labels
        return compact(_inner(es, init, cfg, plda, vbx_cfg, nmesc_cfg))
    out = np.empty(len(labels), dtype=object)
    for g in sorted(set(groups.tolist())):
        idx = np.flatnonzero(merged == g)
        if np.sum(groups == g) > 1:
            sub = _inner(es.subset(idx), labels[idx], cfg, plda, vbx_cfg, nmesc_cfg)
        else:
            sub = np.zeros(len(idx), dtype=int)
        for i, s in zip(idx, sub):
            out[i] = (g, int(s))
    return compact(out)
