import numpy as np
import pytest
from hypothesis import given, strategies as st

from diarkit.cluster_ahc import AhcConfig, ahc, calibrate_threshold
from diarkit.errors import EmptyInput
from diarkit.labels import n_clusters, partition

from oracles import greedy_ahc


def _sym(seed, n, grid=None):
    rng = np.random.default_rng(seed)
    m = rng.uniform(-1, 1, size=(n, n))
    if grid:
        m = np.round(m * grid) / grid
    m = np.triu(m, 1)
    m = m + m.T
    np.fill_diagonal(m, 1.0)
    return m


def four_items():
    m = np.full((4, 4), -0.5)
    m[:2, :2] = m[2:, 2:] = 0.9
    np.fill_diagonal(m, 1.0)
    return m


def test_default_threshold():
    assert AhcConfig().threshold == -0.015


def test_two_blocks():
    labels = ahc(four_items(), AhcConfig(-0.015))
    assert labels.tolist() == [0, 0, 1, 1]


def test_threshold_extremes():
    assert n_clusters(ahc(four_items(), AhcConfig(-1.1))) == 1
    assert n_clusters(ahc(four_items(), AhcConfig(1.1))) == 4


def test_min_and_max_clusters():
    m = four_items()
    assert n_clusters(ahc(m, AhcConfig(-1.1, min_clusters=2))) == 2
    assert n_clusters(ahc(m, AhcConfig(1.1, max_clusters=3))) == 3
    with pytest.raises(ValueError):
        AhcConfig(min_clusters=3, max_clusters=2)


def test_empty_and_single():
    with pytest.raises(EmptyInput):
        ahc(np.zeros((0, 0)))
    assert ahc(np.ones((1, 1))).tolist() == [0]


def test_labels_contiguous_first_appearance():
    labels = ahc(_sym(5, 9), AhcConfig(0.2))
    seen = []
    for lab in labels:
        if lab not in seen:
            seen.append(lab)
    assert seen == list(range(len(seen)))


@given(st.integers(0, 100_000), st.integers(1, 7), st.floats(-1, 1), st.sampled_from([None, 3]))
def test_oracle_equivalence(seed, n, threshold, grid):
    m = _sym(seed, n, grid)
    assert partition(ahc(m, AhcConfig(threshold))) == greedy_ahc(m, threshold)


@given(st.integers(0, 100_000), st.integers(2, 8))
def test_permutation_invariance(seed, n):
    m = _sym(seed, n)  # continuous values: ties have probability zero
    perm = np.random.default_rng(seed + 1).permutation(n)
    a = ahc(m, AhcConfig(0.0))
    b = ahc(m[np.ix_(perm, perm)], AhcConfig(0.0))
    back = np.empty(n, dtype=int)
    back[perm] = b
    assert partition(a) == partition(back)


@given(st.integers(0, 100_000), st.integers(2, 10), st.floats(-1, 1), st.floats(-1, 1))
def test_lower_threshold_never_more_clusters(seed, n, t1, t2):
    lo, hi = sorted((t1, t2))
    m = _sym(seed, n)
    assert n_clusters(ahc(m, AhcConfig(lo))) <= n_clusters(ahc(m, AhcConfig(hi)))


def test_calibration_splits_two_modes():
    rng = np.random.default_rng(0)
    scores = np.concatenate([rng.normal(-0.1, 0.05, 5000), rng.normal(0.6, 0.05, 2000)])
    t = calibrate_threshold(scores)
    assert 0.1 < t < 0.4


def test_calibrated_mode_offsets_threshold():
    m = four_items()
    t = calibrate_threshold(m[np.triu_indices(4, 1)])
    assert partition(ahc(m, AhcConfig(0.0, calibrate=True))) == greedy_ahc(m, t)
