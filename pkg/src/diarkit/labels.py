"""Cluster labelings: contiguous integer ids per item."""
from __future__ import annotations

import numpy as np


def compact(labels) -> np.ndarray:
    """Relabel to 0..k-1 in order of first appearance."""
    labels = np.asarray(labels)
    out = np.empty(len(labels), dtype=int)
    seen: dict = {}
    for i, lab in enumerate(labels.tolist()):
        out[i] = seen.setdefault(lab, len(seen))
    return out


def partition(labels) -> frozenset:
    """Label-free view of a labeling, for comparing clusterings."""
    groups: dict = {}
    for i, lab in enumerate(np.asarray(labels).tolist()):
        groups.setdefault(lab, []).append(i)
    return frozenset(frozenset(g) for g in groups.values())


def n_clusters(labels) -> int:
    return len(set(np.asarray(labels).tolist()))
