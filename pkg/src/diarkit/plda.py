"""Two-covariance PLDA in its diagonalized form."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .embed_store import EmbeddingSet, _fmt, class_scatter
from .errors import DimMismatch, MalformedModel, TooFewClasses, TooFewSamplesPerClass


@dataclass
class PldaModel:
    """``transform @ (x - mean)`` has identity within-class covariance and
    across-class covariance ``diag(phi)`` (``phi`` sorted descending)."""

    mean: np.ndarray
    transform: np.ndarray
    phi: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise DimMismatch("plda.project", self.dim, x.shape[1])
        return (x - self.mean) @ self.transform.T


def fit_plda(es: EmbeddingSet, labels) -> PldaModel:
    labels = list(labels)
    if len(labels) != len(es):
        raise DimMismatch("labels", len(es), len(labels))
    counts = Counter(labels)
    if len(counts) < 2:
        raise TooFewClasses(f"PLDA needs at least 2 classes, got {len(counts)}")
    small = sorted(c for c, k in counts.items() if k < 2)
    if small:
        raise TooFewSamplesPerClass(f"classes with fewer than 2 samples: {small[:5]}")
    x = es.vectors
    N, d = x.shape
    mu = x.mean(axis=0)
    means, n_c, _, sw = class_scatter(x, labels)
    C = len(n_c)
    sw = sw / (N - C)
    sw = sw + (1e-6 * np.trace(sw) / d) * np.eye(d)
    dm = means - mu
    # scatter of class means carries sampling noise of size S_w / n_c per class
    sb = (dm * n_c[:, None]).T @ dm / N - (C / N) * sw
    sb = 0.5 * (sb + sb.T)
    phi, vecs = scipy.linalg.eigh(sb, sw)
    order = np.argsort(phi)[::-1]
    phi = np.clip(phi[order], 0.0, None)
    return PldaModel(mu, vecs[:, order].T.copy(), phi)


def save_plda(model: PldaModel) -> bytes:
    lines = [f"PLDA v1 {model.dim}", ",".join(_fmt(v) for v in model.mean)]
    lines += [",".join(_fmt(v) for v in row) for row in model.transform]
    lines.append(",".join(_fmt(v) for v in model.phi))
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_plda(text) -> PldaModel:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        magic, version, d = lines[0].split()
        d = int(d)
        if (magic, version) != ("PLDA", "v1"):
            raise ValueError("bad header")
        if len(lines) != d + 3:
            raise ValueError(f"expected {d + 3} lines, got {len(lines)}")
        rows = [np.array([float(v) for v in ln.split(",")]) for ln in lines[1:]]
        if any(r.shape != (d,) for r in rows):
            raise ValueError("row length mismatch")
    except (ValueError, IndexError) as exc:
        raise MalformedModel(f"cannot parse PLDA model: {exc}") from None
    phi = rows[-1]
    if not np.all(np.isfinite(np.vstack(rows))):
        raise MalformedModel("non-finite values")
    if np.any(phi < 0):
        raise MalformedModel("negative across-class variance")
    return PldaModel(rows[0], np.vstack(rows[1:-1]), phi)
