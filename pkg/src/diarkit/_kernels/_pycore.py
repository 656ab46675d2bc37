"""Pure-Python (numpy) versions of the compiled kernels.

Same contracts and the same floating-point update order as ``_core.pyx`` so
the two backends agree on every tie-break.
"""
import numpy as np
from scipy.special import logsumexp


def forward_backward(lls, log_tr, log_init):
    T, S = lls.shape
    lfw = np.full((T, S), -np.inf)
    lbw = np.full((T, S), -np.inf)
    lfw[0] = lls[0] + log_init
    for t in range(1, T):
        lfw[t] = lls[t] + logsumexp(lfw[t - 1][:, None] + log_tr, axis=0)
    lbw[-1] = 0.0
    for t in range(T - 2, -1, -1):
        lbw[t] = logsumexp(log_tr + (lls[t + 1] + lbw[t + 1])[None, :], axis=1)
    total = logsumexp(lfw[-1])
    gamma = np.exp(lfw + lbw - total)
    return gamma, float(total), lfw, lbw


def ahc_average(sim, threshold, min_clusters, max_clusters):
    n = sim.shape[0]
    L = np.array(sim, dtype=np.float64, copy=True)
    np.fill_diagonal(L, -np.inf)
    size = np.ones(n)
    parent = np.arange(n)
    active = np.ones(n, dtype=bool)
    nn = np.argmax(L, axis=1)
    nv = L[np.arange(n), nn]
    count = n
    while count > min_clusters:
        cand = np.flatnonzero(active & np.isfinite(nv))
        if cand.size == 0:
            break
        vals = nv[cand]
        best = vals.max()
        tied = cand[vals == best]
        lo = np.minimum(tied, nn[tied])
        hi = np.maximum(tied, nn[tied])
        pick = np.lexsort((hi, lo))[0]
        a, b = int(lo[pick]), int(hi[pick])
        if best < threshold and count <= max_clusters:
            break
        others = active.copy()
        others[[a, b]] = False
        na, nb = size[a], size[b]
        row = (na * L[a, others] + nb * L[b, others]) / (na + nb)
        L[a, others] = row
        L[others, a] = row
        L[b, :] = -np.inf
        L[:, b] = -np.inf
        active[b] = False
        nv[b] = -np.inf
        size[a] = na + nb
        parent[parent == b] = a
        count -= 1
        stale = active & ((nn == a) | (nn == b))
        stale[a] = True
        rows = np.flatnonzero(stale)
        nn[rows] = np.argmax(L[rows], axis=1)
        nv[rows] = L[rows, nn[rows]]
        rest = np.flatnonzero(active & ~stale)
        col = L[rest, a]
        better = (col > nv[rest]) | ((col == nv[rest]) & (a < nn[rest]))
        nn[rest[better]] = a
        nv[rest[better]] = col[better]
    return parent
