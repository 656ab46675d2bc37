"""Embedding sets: CSV ingest, length normalisation, LDA and cosine affinity."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimMismatch, MalformedLine, MalformedModel, RankDeficient, TooFewClasses, ZeroVector
from .timeline import TimedSegment


@dataclass
class EmbeddingSet:
    """Window embeddings, sorted by (recording_id, onset).

    ``vectors`` is an (n, d) float array aligned with ``recording_ids`` and
    ``windows``.
    """

    recording_ids: list[str]
    windows: list[TimedSegment]
    vectors: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        self.vectors = vectors.reshape(len(self.windows), self.dim if not vectors.size else -1)
        if not self.dim:
            self.dim = self.vectors.shape[1]
        if self.vectors.shape[1] != self.dim:
            raise DimMismatch("vectors", self.dim, self.vectors.shape[1])
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embeddings must be finite")
        order = sorted(range(len(self.windows)), key=lambda i: (self.recording_ids[i], self.windows[i].onset, self.windows[i].offset))
        if order != list(range(len(order))):
            self.recording_ids = [self.recording_ids[i] for i in order]
            self.windows = [self.windows[i] for i in order]
            self.vectors = self.vectors[order]

    def __len__(self):
        return len(self.windows)

    @property
    def recordings(self) -> list[str]:
        return sorted(set(self.recording_ids))

    def indices(self, recording_id: str) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.recording_ids) if r == recording_id], dtype=int)

    def subset(self, idx) -> "EmbeddingSet":
        idx = np.asarray(idx, dtype=int)
        return EmbeddingSet(
            [self.recording_ids[i] for i in idx], [self.windows[i] for i in idx], self.vectors[idx], self.dim
        )

    def for_recording(self, recording_id: str) -> "EmbeddingSet":
        return self.subset(self.indices(recording_id))

    def with_vectors(self, vectors) -> "EmbeddingSet":
        vectors = np.asarray(vectors, dtype=np.float64)
        return EmbeddingSet(list(self.recording_ids), list(self.windows), vectors, vectors.shape[1])


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def read_embeddings(text) -> EmbeddingSet:
    """Parse ``recording_id,onset,offset,e0,...`` CSV."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        return EmbeddingSet([], [], np.zeros((0, 0)), 0)
    header = rows[0]
    if header[:3] != ["recording_id", "onset", "offset"] or len(header) < 4:
        raise MalformedLine(1, "bad header")
    dim = len(header) - 3
    recs, wins, vecs = [], [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 3:
            raise DimMismatch(f"row {line_no}", dim, len(row) - 3)
        try:
            onset, offset = float(row[1]), float(row[2])
            vec = [float(v) for v in row[3:]]
            win = TimedSegment(onset, offset)
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from None
        if not all(math.isfinite(v) for v in vec):
            raise MalformedLine(line_no, "non-finite embedding value")
        recs.append(row[0])
        wins.append(win)
        vecs.append(vec)
    return EmbeddingSet(recs, wins, np.array(vecs).reshape(len(vecs), dim), dim)


def write_embeddings(es: EmbeddingSet) -> bytes:
    buf = io.StringIO()
    buf.write(",".join(["recording_id", "onset", "offset"] + [f"e{i}" for i in range(es.dim)]) + "\n")
    for rec, win, vec in zip(es.recording_ids, es.windows, es.vectors):
        buf.write(",".join([rec, _fmt(win.onset), _fmt(win.offset)] + [_fmt(v) for v in vec]) + "\n")
    return buf.getvalue().encode("utf-8")


def read_labels(text) -> list[str]:
    """Per-record labels file: header ``label`` then one label per row, aligned with the embedding CSV."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "label":
        raise MalformedLine(1, "labels file must start with a 'label' header")
    return lines[1:]


def write_labels(labels) -> bytes:
    return ("label\n" + "".join(f"{lab}\n" for lab in labels)).encode("utf-8")


def length_normalize(es: EmbeddingSet) -> EmbeddingSet:
    norms = np.linalg.norm(es.vectors, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ZeroVector(int(bad[0]))
    return es.with_vectors(es.vectors / norms[:, None])


def center(es: EmbeddingSet) -> EmbeddingSet:
    """Subtract the set mean."""
    if len(es) == 0:
        return es
    return es.with_vectors(es.vectors - es.vectors.mean(axis=0))


@dataclass
class LdaTransform:
    mean: np.ndarray
    projection: np.ndarray  # (k, d)

    @property
    def out_dim(self) -> int:
        return self.projection.shape[0]

    @property
    def in_dim(self) -> int:
        return self.projection.shape[1]


def class_scatter(x: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray, list, np.ndarray]:
    """Return (class means, class counts, class names, within-class scatter / N)."""
    labels = np.asarray(labels)
    names = sorted(set(labels.tolist()))
    d = x.shape[1]
    means = np.zeros((len(names), d))
    counts = np.zeros(len(names))
    sw = np.zeros((d, d))
    for c, name in enumerate(names):
        xc = x[labels == name]
        means[c] = xc.mean(axis=0)
        counts[c] = len(xc)
        dev = xc - means[c]
        sw += dev.T @ dev
    return means, counts, names, sw


def fit_lda(es: EmbeddingSet, labels, out_dim: int = 128) -> LdaTransform:
    labels = list(labels)
    if len(labels) != len(es):
        raise DimMismatch("labels", len(es), len(labels))
    x = es.vectors
    n_classes = len(set(labels))
    if n_classes < 2:
        raise TooFewClasses(f"LDA needs at least 2 classes, got {n_classes}")
    if out_dim > n_classes - 1 or out_dim > es.dim:
        raise RankDeficient(f"out_dim {out_dim} exceeds min(d={es.dim}, classes-1={n_classes - 1})")
    mu = x.mean(axis=0)
    means, counts, _, sw = class_scatter(x, labels)
    sw /= len(x)
    dm = means - mu
    sb = (dm * counts[:, None]).T @ dm / len(x)
    d = es.dim
    sw = sw + (1e-6 * np.trace(sw) / d) * np.eye(d)
    evals, evecs = scipy.linalg.eigh(sb, sw)
    order = np.argsort(evals)[::-1][:out_dim]
    proj = evecs[:, order].T
    # unit rows with a fixed sign convention (largest-magnitude entry positive)
    proj /= np.linalg.norm(proj, axis=1, keepdims=True)
    signs = np.sign(proj[np.arange(len(proj)), np.argmax(np.abs(proj), axis=1)])
    proj *= signs[:, None]
    return LdaTransform(mu, proj)


def apply_transform(es: EmbeddingSet, t: LdaTransform) -> EmbeddingSet:
    if es.dim != t.in_dim:
        raise DimMismatch("apply_transform", t.in_dim, es.dim)
    return es.with_vectors((es.vectors - t.mean) @ t.projection.T)


def save_lda(t: LdaTransform) -> bytes:
    lines = [f"LDA v1 {t.out_dim} {t.in_dim}", ",".join(_fmt(v) for v in t.mean)]
    lines += [",".join(_fmt(v) for v in row) for row in t.projection]
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_lda(text) -> LdaTransform:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        magic, version, k, d = lines[0].split()
        k, d = int(k), int(d)
        if (magic, version) != ("LDA", "v1") or len(lines) != k + 2:
            raise ValueError("bad header or row count")
        mean = np.array([float(v) for v in lines[1].split(",")])
        proj = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
        if mean.shape != (d,) or proj.shape != (k, d):
            raise ValueError("bad shapes")
    except (ValueError, IndexError) as exc:
        raise MalformedModel(f"cannot parse LDA transform: {exc}") from None
    return LdaTransform(mean, proj)


@dataclass
class AffinityMatrix:
    matrix: np.ndarray
    index: list[int]

    def __len__(self):
        return self.matrix.shape[0]


def cosine_affinity(es: EmbeddingSet) -> AffinityMatrix:
    x = es.vectors
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ZeroVector(int(bad[0]))
    return AffinityMatrix(cosine_matrix(x / norms[:, None]), list(range(len(es))))


def cosine_matrix(unit: np.ndarray) -> np.ndarray:
    """Cosine similarities of unit rows, exactly symmetric, unit diagonal, clipped to [-1, 1]."""
    a = unit @ unit.T
    a = np.triu(a, 1)
    a = a + a.T
    np.clip(a, -1.0, 1.0, out=a)
    np.fill_diagonal(a, 1.0)
    return a
