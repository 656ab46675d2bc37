"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built; set ``DIARKIT_PURE_PYTHON=1``
to force the fallback. Both expose:

``forward_backward(lls, log_tr, log_init) -> (gamma, total_loglik, log_fw, log_bw)``
    Log-space HMM smoothing over a (T, S) emission log-likelihood matrix.

``ahc_average(sim, threshold, min_clusters, max_clusters) -> representatives``
    Average-linkage agglomeration on a similarity matrix; each item is mapped
    to the smallest item index of its final cluster.
"""
import os

import numpy as np

from . import _pycore

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

BACKEND = "python" if _core is None or os.environ.get("DIARKIT_PURE_PYTHON") == "1" else "cython"
_impl = _pycore if BACKEND == "python" else _core


def available_backends():
    return ["python"] if _core is None else ["cython", "python"]


def get_backend(name=None):
    if name is None:
        return _impl
    if name == "python":
        return _pycore
    if name == "cython":
        if _core is None:
            raise ImportError("diarkit._kernels._core was not compiled")
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


def forward_backward(lls, log_tr, log_init, backend=None):
    lls = np.ascontiguousarray(lls, dtype=np.float64)
    log_tr = np.ascontiguousarray(log_tr, dtype=np.float64)
    log_init = np.ascontiguousarray(log_init, dtype=np.float64)
    gamma, total, lfw, lbw = get_backend(backend).forward_backward(lls, log_tr, log_init)
    return gamma, float(total), lfw, lbw


def ahc_average(sim, threshold, min_clusters=1, max_clusters=None, backend=None):
    sim = np.ascontiguousarray(sim, dtype=np.float64)
    n = sim.shape[0]
    if max_clusters is None:
        max_clusters = n
    return np.asarray(
        get_backend(backend).ahc_average(sim, float(threshold), int(min_clusters), int(max_clusters))
    )
