"""Spectral clustering auto-tuned by the normalized maximum eigengap (NME-SC)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .embed_store import AffinityMatrix
from .errors import BadK, BadP, DegenerateMatrix
from .labels import compact

# above this size the Laplacian spectrum is computed with Lanczos on the sparse matrix
DENSE_LIMIT = 400
GAP_FLOOR = 1e-10


@dataclass(frozen=True)
class NmescConfig:
    p_min: int = 1
    p_max: int | None = None  # default max(2, n // 10), capped at n - 1
    k_max: int = 8
    kmeans_restarts: int = 10
    seed: int = 0
    p_search_volume: int = 30  # at most this many p values, evenly spread over [p_min, p_max]
    force_k: int | None = None

    def __post_init__(self):
        if self.p_min < 1 or self.k_max < 1 or self.kmeans_restarts < 1 or self.p_search_volume < 1:
            raise ValueError("p_min, k_max, kmeans_restarts and p_search_volume must be positive")


@dataclass
class TuneResult:
    p_star: int
    k_star: int
    trace: list[dict] = field(default_factory=list)


def _matrix(A) -> np.ndarray:
    m = A.matrix if isinstance(A, AffinityMatrix) else np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise DegenerateMatrix("affinity matrix has non-finite entries")
    return m


def _row_order(m: np.ndarray) -> np.ndarray:
    """Off-diagonal column indices of each row by decreasing value, ties by lower index."""
    work = m.copy()
    np.fill_diagonal(work, -np.inf)
    return np.argsort(-work, axis=1, kind="stable")[:, :-1]


def _binarize(m: np.ndarray, order: np.ndarray, p: int) -> np.ndarray:
    n = m.shape[0]
    rows = np.arange(n)[:, None]
    cols = order[:, :p]
    out = np.zeros_like(m)
    out[rows, cols] = m[rows, cols]
    out = np.maximum(out, out.T)
    out[np.arange(n), np.arange(n)] = np.diag(m)
    return out


def binarize_rows(A, p: int) -> np.ndarray:
    """Keep the ``p`` largest off-diagonal entries per row, then symmetrize by elementwise max."""
    m = _matrix(A)
    n = m.shape[0]
    if not 1 <= p < n:
        raise BadP(f"p must satisfy 1 <= p < n={n}, got {p}")
    return _binarize(m, _row_order(m), p)


def laplacian(B: np.ndarray) -> np.ndarray:
    """Unnormalized Laplacian ``D - B`` of a non-negative symmetric affinity."""
    W = np.clip(B, 0.0, None)
    np.fill_diagonal(W, 0.0)
    return np.diag(W.sum(axis=1)) - W


def _v0(n: int) -> np.ndarray:
    return np.random.default_rng(12345).standard_normal(n)


def smallest_eigh(L: np.ndarray, k: int, vectors: bool = False):
    """``k`` smallest eigenvalues (ascending) of a Laplacian, optionally with eigenvectors."""
    n = L.shape[0]
    k = min(k, n)
    if n <= DENSE_LIMIT or k >= n - 1:
        res = scipy.linalg.eigh(L, eigvals_only=not vectors, subset_by_index=[0, k - 1])
        return res if vectors else (res, None)
    # largest eigenpairs of c*I - L are the smallest of L (Gershgorin: spectrum within [0, c])
    c = 2.0 * float(np.max(np.diag(L))) + 1.0
    M = scipy.sparse.identity(n, format="csr") * c - scipy.sparse.csr_matrix(L)
    if vectors:
        w, v = scipy.sparse.linalg.eigsh(M, k=k, which="LA", v0=_v0(n))
        order = np.argsort(c - w, kind="stable")
        return (c - w)[order], v[:, order]
    w = scipy.sparse.linalg.eigsh(M, k=k, which="LA", v0=_v0(n), return_eigenvectors=False)
    return np.sort(c - w), None


def p_candidates(n: int, cfg: NmescConfig) -> list[int]:
    p_max = cfg.p_max if cfg.p_max is not None else max(2, n // 10)
    p_max = min(p_max, n - 1)
    p_min = min(cfg.p_min, p_max)
    full = list(range(p_min, p_max + 1))
    if len(full) <= cfg.p_search_volume:
        return full
    grid = np.linspace(p_min, p_max, cfg.p_search_volume)
    return sorted(set(int(round(g)) for g in grid))


def nme_tune(A, cfg: NmescConfig = NmescConfig()) -> TuneResult:
    """Pick the pruning level ``p`` minimising (p/n) / max-eigengap and the speaker count at it."""
    m = _matrix(A)
    n = m.shape[0]
    if n < 2:
        raise DegenerateMatrix("NME-SC needs at least 2 items")
    order = _row_order(m)
    kk = min(cfg.k_max, n - 1)
    trace = []
    best = None
    for p in p_candidates(n, cfg):
        L = laplacian(_binarize(m, order, p))
        lam, _ = smallest_eigh(L, kk + 1)
        gaps = np.diff(lam)[:kk]
        k_p = int(np.argmax(gaps)) + 1
        g_p = float(gaps[k_p - 1])
        ratio = (p / n) / max(g_p, GAP_FLOOR)
        trace.append({"p": p, "max_gap": g_p, "ratio": ratio, "k": k_p})
        if best is None or ratio < best[0]:
            best = (ratio, p, k_p)
    return TuneResult(best[1], best[2], trace)


def kmeans(x: np.ndarray, k: int, restarts: int = 10, seed: int = 0, max_iter: int = 300):
    """Lloyd's k-means with k-means++ seeding; returns (labels, inertia) of the best restart."""
    best_labels, best_inertia = None, np.inf
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        centers = _kmeanspp(x, k, rng)
        labels = None
        for _ in range(max_iter):
            d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new = np.argmin(d2, axis=1)
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for c in range(k):
                members = x[labels == c]
                if len(members):
                    centers[c] = members.mean(axis=0)
        inertia = float(((x - centers[labels]) ** 2).sum())
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = [i for i in range(n) if i not in chosen]
            idx = remaining[0]
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return x[chosen].copy()


def spectral_cluster(A, k: int, cfg: NmescConfig = NmescConfig(), p: int | None = None) -> np.ndarray:
    """k-means on row-normalised Laplacian eigenvectors of the (optionally pruned) affinity."""
    m = _matrix(A)
    n = m.shape[0]
    if not 1 <= k <= n:
        raise BadK(f"k must satisfy 1 <= k <= n={n}, got {k}")
    if k == 1:
        return np.zeros(n, dtype=int)
    B = m if p is None else _binarize(m, _row_order(m), p)
    _, vecs = smallest_eigh(laplacian(B), k, vectors=True)
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    emb = np.where(norms > 0, vecs / np.where(norms > 0, norms, 1.0), vecs)
    labels, _ = kmeans(emb, k, cfg.kmeans_restarts, cfg.seed)
    return compact(labels)


def nmesc(A, cfg: NmescConfig = NmescConfig()) -> tuple[np.ndarray, TuneResult]:
    m = _matrix(A)
    if m.shape[0] == 1:
        return np.zeros(1, dtype=int), TuneResult(0, 1)
    tune = nme_tune(m, cfg)
    k = cfg.force_k if cfg.force_k is not None else tune.k_star
    return spectral_cluster(m, min(k, m.shape[0]), cfg, p=tune.p_star), tune
