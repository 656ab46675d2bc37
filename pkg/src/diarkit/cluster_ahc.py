"""Average-linkage agglomerative clustering on a similarity matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .embed_store import AffinityMatrix
from .errors import EmptyInput
from .labels import compact


@dataclass(frozen=True)
class AhcConfig:
    threshold: float = -0.015
    min_clusters: int = 1
    max_clusters: int | None = None
    calibrate: bool = False  # threshold is an offset from a two-Gaussian score calibration

    def __post_init__(self):
        if self.min_clusters < 1:
            raise ValueError("min_clusters must be >= 1")
        if self.max_clusters is not None and self.max_clusters < self.min_clusters:
            raise ValueError("min_clusters must not exceed max_clusters")


def calibrate_threshold(scores, n_iters: int = 20) -> float:
    """Decision point of a tied-variance two-Gaussian mixture fitted to similarity scores."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size < 2 or np.std(s) == 0:
        return float(np.mean(s)) if s.size else 0.0
    weights = np.array([0.5, 0.5])
    means = s.mean() + s.std() * np.array([-1.0, 1.0])
    var = s.var()
    threshold = float(s.mean())
    for _ in range(n_iters):
        ll = np.log(weights) - 0.5 * (s[:, None] - means) ** 2 / var
        ll -= ll.max(axis=1, keepdims=True)
        post = np.exp(ll)
        post /= post.sum(axis=1, keepdims=True)
        counts = post.sum(axis=0)
        if np.any(counts <= 0):
            break
        weights = counts / counts.sum()
        means = s @ post / counts
        var = float(((s ** 2) @ post / counts - means ** 2) @ weights)
        if var <= 0 or means[1] == means[0]:
            break
        # equal posterior point: log w0 - (t-m0)^2/2v = log w1 - (t-m1)^2/2v
        threshold = float((means[1] ** 2 - means[0] ** 2) / 2 - var * np.log(weights[1] / weights[0])) / (
            means[1] - means[0]
        )
    return threshold


def ahc(A, cfg: AhcConfig = AhcConfig(), backend: str | None = None) -> np.ndarray:
    """Merge the most similar pair of clusters until the best average
    similarity drops below ``cfg.threshold`` (or ``min_clusters`` is reached).

    While more than ``max_clusters`` clusters remain, merging continues
    regardless of the threshold. Ties go to the lowest (i, j) pair, where a
    cluster is identified by its smallest item index.
    """
    m = A.matrix if isinstance(A, AffinityMatrix) else np.asarray(A, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise EmptyInput("AHC needs a non-empty square matrix")
    n = m.shape[0]
    if n == 1:
        return np.zeros(1, dtype=int)
    max_c = n if cfg.max_clusters is None else cfg.max_clusters
    threshold = cfg.threshold
    if cfg.calibrate:
        threshold += calibrate_threshold(m[np.triu_indices(n, 1)])
    reps = _kernels.ahc_average(m, threshold, min(cfg.min_clusters, n), max_c, backend=backend)
    return compact(reps)
