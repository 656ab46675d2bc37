import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import logsumexp

from diarkit import _kernels

from oracles import greedy_ahc

BACKENDS = _kernels.available_backends()


def test_compiled_backend_is_built():
    # the package is meant to ship with its extension; the fallback still has to work without it
    assert "cython" in BACKENDS


def _hmm(seed, T=60, S=4):
    rng = np.random.default_rng(seed)
    lls = rng.normal(size=(T, S)) * 3
    tr = rng.dirichlet(np.ones(S), size=S)
    init = rng.dirichlet(np.ones(S))
    return lls, np.log(tr), np.log(init)


def brute_forward_backward(lls, log_tr, log_init):
    T, S = lls.shape
    fw = np.empty((T, S))
    fw[0] = log_init + lls[0]
    for t in range(1, T):
        fw[t] = logsumexp(fw[t - 1][:, None] + log_tr, axis=0) + lls[t]
    bw = np.zeros((T, S))
    for t in range(T - 2, -1, -1):
        bw[t] = logsumexp(log_tr + lls[t + 1] + bw[t + 1], axis=1)
    total = logsumexp(fw[-1])
    return np.exp(fw + bw - total), total


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(5))
def test_forward_backward_matches_reference(backend, seed):
    lls, log_tr, log_init = _hmm(seed)
    gamma, total, _, _ = _kernels.forward_backward(lls, log_tr, log_init, backend=backend)
    g_ref, t_ref = brute_forward_backward(lls, log_tr, log_init)
    np.testing.assert_allclose(gamma, g_ref, atol=1e-10)
    assert abs(total - t_ref) < 1e-8 * max(1.0, abs(t_ref))
    np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_forward_backward_no_underflow(backend):
    lls, log_tr, log_init = _hmm(0, T=5000, S=3)
    gamma, total, _, _ = _kernels.forward_backward(lls * 200, log_tr, log_init, backend=backend)
    assert np.all(np.isfinite(gamma)) and np.isfinite(total)


def test_backends_agree_bitwise_enough():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not available")
    lls, log_tr, log_init = _hmm(7, T=300, S=6)
    a = _kernels.forward_backward(lls, log_tr, log_init, backend="cython")
    b = _kernels.forward_backward(lls, log_tr, log_init, backend="python")
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)


def _sym(seed, n, grid=None):
    rng = np.random.default_rng(seed)
    m = rng.uniform(-1, 1, size=(n, n))
    if grid:
        m = np.round(m * grid) / grid  # coarse values force ties
    m = np.triu(m, 1)
    m = m + m.T
    np.fill_diagonal(m, 1.0)
    return m


def _partition(reps):
    groups = {}
    for i, r in enumerate(reps):
        groups.setdefault(int(r), set()).add(i)
    return frozenset(frozenset(g) for g in groups.values())


@pytest.mark.parametrize("backend", BACKENDS)
@given(st.integers(0, 10_000), st.integers(1, 9), st.sampled_from([None, 2, 4]),
       st.floats(-1.0, 1.0), st.integers(1, 4))
def test_ahc_kernel_matches_oracle(backend, seed, n, grid, threshold, min_c):
    m = _sym(seed, n, grid)
    reps = _kernels.ahc_average(m, threshold, min_c, None, backend=backend)
    assert _partition(reps) == greedy_ahc(m, threshold, min_c)


@pytest.mark.parametrize("backend", BACKENDS)
def test_ahc_kernel_max_clusters(backend):
    m = _sym(3, 8)
    reps = _kernels.ahc_average(m, 2.0, 1, 3, backend=backend)
    assert len(set(reps.tolist())) == 3
    assert _partition(reps) == greedy_ahc(m, 2.0, 1, 3)


def test_ahc_backends_agree_large():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not available")
    m = _sym(11, 300, grid=8)
    a = _kernels.ahc_average(m, 0.05, backend="cython")
    b = _kernels.ahc_average(m, 0.05, backend="python")
    np.testing.assert_array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")
