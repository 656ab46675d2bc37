import numpy as np
import pytest
from hypothesis import given, strategies as st

from diarkit.cluster_nmesc import (DENSE_LIMIT, NmescConfig, binarize_rows, kmeans, laplacian, nme_tune, nmesc,
                                   p_candidates, smallest_eigh, spectral_cluster)
from diarkit.embed_store import cosine_affinity
from diarkit.errors import BadK, BadP, DegenerateMatrix
from diarkit.labels import partition
from diarkit.recluster import cosine_input
from diarkit.synth import SynthConfig, gen_embeddings, gen_reference
from diarkit.timeline import SegmentationConfig


def blocks(sizes, within=1.0, cross=0.0):
    n = sum(sizes)
    m = np.full((n, n), cross)
    start = 0
    for s in sizes:
        m[start:start + s, start:start + s] = within
        start += s
    np.fill_diagonal(m, 1.0)
    return m


def truth(sizes):
    return partition(np.repeat(np.arange(len(sizes)), sizes))


def _rand_aff(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 5))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    a = x @ x.T
    np.fill_diagonal(a, 1.0)
    return a


def test_binarize_full_p_is_identity():
    a = _rand_aff(0, 6)
    np.testing.assert_array_equal(binarize_rows(a, 5), a)


def test_binarize_keeps_block_zeros():
    a = blocks([4, 4], within=0.8)
    b = binarize_rows(a, 2)
    assert np.all(b[:4, 4:] == 0) and np.all(b[4:, :4] == 0)


def test_binarize_ties_keep_lowest_columns():
    a = np.array([[1.0, 0.5, 0.5, 0.5],
                  [0.5, 1.0, 0.1, 0.2],
                  [0.5, 0.1, 1.0, 0.3],
                  [0.5, 0.2, 0.3, 1.0]])
    b = binarize_rows(a, 1)
    # row 0 keeps column 1; rows 1-3 keep column 0 (or their largest); max-symmetrised
    assert b[0, 1] == 0.5 and b[0, 2] == 0.5 and b[0, 3] == 0.5
    assert b[1, 2] == 0 and b[1, 3] == 0
    assert b[2, 3] == 0


def test_binarize_bad_p():
    with pytest.raises(BadP):
        binarize_rows(_rand_aff(0, 5), 0)
    with pytest.raises(BadP):
        binarize_rows(_rand_aff(0, 5), 5)


@given(st.integers(0, 10_000), st.integers(3, 30), st.data())
def test_binarize_properties(seed, n, data):
    a = _rand_aff(seed, n)
    p = data.draw(st.integers(1, n - 1))
    b = binarize_rows(a, p)
    assert np.array_equal(b, b.T)
    assert np.array_equal(np.diag(b), np.diag(a))
    assert np.all((b == 0) | (b == a))
    # each row's p largest off-diagonal entries survive when positive (max-symmetrisation can only raise)
    off = a.copy()
    np.fill_diagonal(off, -np.inf)
    for i in range(n):
        for j in np.argsort(-off[i], kind="stable")[:p]:
            if a[i, j] > 0:
                assert b[i, j] == a[i, j]


@given(st.integers(0, 10_000), st.integers(3, 40), st.data())
def test_laplacian_psd(seed, n, data):
    a = _rand_aff(seed, n)
    p = data.draw(st.integers(1, n - 1))
    lam = np.linalg.eigvalsh(laplacian(binarize_rows(a, p)))
    assert lam.min() >= -1e-8


def test_sparse_eigensolver_matches_dense():
    n = DENSE_LIMIT + 50
    a = blocks([150, 150, 150], within=0.7, cross=0.05)
    rng = np.random.default_rng(0)
    noise = rng.uniform(0, 0.05, (n, n))
    a = a + (noise + noise.T) / 2
    L = laplacian(binarize_rows(a, 40))
    lam, _ = smallest_eigh(L, 6)
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(L)[:6], atol=1e-7)


@pytest.mark.parametrize("b", [1, 2, 3, 4, 5])
def test_block_recovery(b):
    sizes = [20 + 3 * i for i in range(b)]
    labels, tune = nmesc(blocks(sizes), NmescConfig())
    assert tune.k_star == b
    assert partition(labels) == truth(sizes)


def test_k_star_on_blocks():
    assert nme_tune(blocks([10, 10])).k_star == 2
    assert nme_tune(blocks([10, 10, 10])).k_star == 3


def test_synthetic_three_speakers():
    cfg = SynthConfig(n_speakers=3, duration=120, separation=6.0, seed=7)
    ref, _, _ = gen_reference(cfg, "r")
    es, _ = gen_embeddings(ref, SegmentationConfig(), cfg)
    tune = nme_tune(cosine_affinity(cosine_input(es)))
    assert tune.k_star == 3


def test_tuning_deterministic():
    a = _rand_aff(3, 60)
    r1, r2 = nme_tune(a), nme_tune(a.copy())
    assert (r1.p_star, r1.k_star, r1.trace) == (r2.p_star, r2.k_star, r2.trace)


def test_tuning_errors():
    with pytest.raises(DegenerateMatrix):
        nme_tune(np.ones((1, 1)))
    bad = _rand_aff(0, 5)
    bad[0, 1] = bad[1, 0] = np.nan
    with pytest.raises(DegenerateMatrix):
        nme_tune(bad)


def test_p_candidates_grid():
    assert p_candidates(50, NmescConfig()) == [1, 2, 3, 4, 5]
    grid = p_candidates(5000, NmescConfig())
    assert grid[0] == 1 and grid[-1] == 500 and len(grid) <= 30 and grid == sorted(grid)
    assert p_candidates(5, NmescConfig()) == [1, 2]


def test_spectral_cluster_examples():
    a = blocks([6, 6])
    assert spectral_cluster(a, 1).tolist() == [0] * 12
    assert partition(spectral_cluster(a, 2)) == truth([6, 6])
    assert len(set(spectral_cluster(_rand_aff(1, 7), 7).tolist())) == 7
    with pytest.raises(BadK):
        spectral_cluster(a, 0)
    with pytest.raises(BadK):
        spectral_cluster(a, 13)


@given(st.integers(0, 10_000))
def test_permutation_invariance_on_blocks(seed):
    sizes = [20, 25, 30]
    a = blocks(sizes, within=0.8, cross=0.1)
    perm = np.random.default_rng(seed).permutation(len(a))
    lab, _ = nmesc(a[np.ix_(perm, perm)])
    back = np.empty(len(a), dtype=int)
    back[perm] = lab
    assert partition(back) == truth(sizes)


def test_kmeans_seeded():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(0, 0.1, (20, 2)), rng.normal(3, 0.1, (20, 2))])
    l1, i1 = kmeans(x, 2, 5, seed=4)
    l2, i2 = kmeans(x, 2, 5, seed=4)
    assert np.array_equal(l1, l2) and i1 == i2
    assert partition(l1) == truth([20, 20])
