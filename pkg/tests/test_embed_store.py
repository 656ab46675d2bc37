import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from diarkit.embed_store import (EmbeddingSet, apply_transform, center, cosine_affinity, fit_lda, length_normalize,
                                 load_lda, read_embeddings, read_labels, save_lda, write_embeddings, write_labels)
from diarkit.errors import DimMismatch, MalformedLine, MalformedModel, RankDeficient, TooFewClasses, ZeroVector
from diarkit.timeline import TimedSegment


def make_set(vectors, rec="r"):
    vectors = np.asarray(vectors, dtype=float)
    wins = [TimedSegment(i * 0.24, i * 0.24 + 1.44) for i in range(len(vectors))]
    return EmbeddingSet([rec] * len(vectors), wins, vectors)


def test_read_single_row():
    es = read_embeddings("recording_id,onset,offset,e0,e1,e2,e3\nr,0,1.44,1,2,3,4\n")
    assert (len(es), es.dim) == (1, 4)
    np.testing.assert_array_equal(es.vectors[0], [1, 2, 3, 4])


def test_read_mixed_dims():
    text = "recording_id,onset,offset,e0,e1,e2,e3\nr,0,1,1,2,3,4\nr,1,2,1,2,3,4,5\n"
    with pytest.raises(DimMismatch):
        read_embeddings(text)


def test_read_empty_body():
    es = read_embeddings("recording_id,onset,offset,e0,e1\n")
    assert len(es) == 0 and es.dim == 2


def test_read_malformed():
    with pytest.raises(MalformedLine):
        read_embeddings("rec,onset,offset,e0\nr,0,1,1\n")
    with pytest.raises(MalformedLine) as exc:
        read_embeddings("recording_id,onset,offset,e0\nr,0,1,1\nr,x,1,1\n")
    assert exc.value.line_no == 3


def test_sorted_on_read():
    es = read_embeddings("recording_id,onset,offset,e0\nb,0,1,1\na,2,3,2\na,1,2,3\n")
    assert es.recording_ids == ["a", "a", "b"]
    assert [w.onset for w in es.windows] == [1, 2, 0]
    np.testing.assert_array_equal(es.vectors[:, 0], [3, 2, 1])


@given(arrays(np.float64, (5, 3), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_csv_roundtrip_9_significant_digits(x):
    es = make_set(x)
    back = read_embeddings(write_embeddings(es))
    np.testing.assert_allclose(back.vectors, es.vectors, rtol=1e-8, atol=1e-300)
    # a second pass is exact
    assert write_embeddings(read_embeddings(write_embeddings(back))) == write_embeddings(back)


def test_labels_roundtrip():
    assert read_labels(write_labels(["a", "b", "a"])) == ["a", "b", "a"]
    with pytest.raises(MalformedLine):
        read_labels("a\nb\n")


def test_length_normalize_examples():
    np.testing.assert_allclose(length_normalize(make_set([[3, 4]])).vectors, [[0.6, 0.8]])
    u = np.array([[0.0, 1.0, 0.0]])
    np.testing.assert_array_equal(length_normalize(make_set(u)).vectors, u)
    with pytest.raises(ZeroVector) as exc:
        length_normalize(make_set([[1, 0], [0, 0]]))
    assert exc.value.index == 1


@given(arrays(np.float64, (6, 4), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_length_normalize_norm_one(x):
    if np.any(np.linalg.norm(x, axis=1) < 1e-100):
        return
    out = length_normalize(make_set(x))
    np.testing.assert_allclose(np.linalg.norm(out.vectors, axis=1), 1.0, atol=1e-12)


def _two_class_axis0(seed=0, n=200):
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n)
    x = rng.standard_normal((2 * n, 3))
    x[:, 0] += np.where(labels == 0, -3.0, 3.0)
    return make_set(x), labels.tolist()


def test_lda_finds_discriminant_axis():
    es, labels = _two_class_axis0()
    t = fit_lda(es, labels, 1)
    row = t.projection[0] / np.linalg.norm(t.projection[0])
    assert abs(row[0]) > 0.99


def test_lda_errors():
    es, labels = _two_class_axis0()
    with pytest.raises(RankDeficient):
        fit_lda(es, labels, 2)
    with pytest.raises(TooFewClasses):
        fit_lda(es, [0] * len(es), 1)


def test_lda_translation_invariant():
    rng = np.random.default_rng(3)
    labels = np.repeat(np.arange(5), 30)
    x = rng.standard_normal((150, 6)) + rng.standard_normal((5, 6))[labels] * 3
    a = fit_lda(make_set(x), labels, 3)
    b = fit_lda(make_set(x + 17.0), labels, 3)
    for ra, rb in zip(a.projection, b.projection):
        assert abs(abs(np.dot(ra, rb)) / (np.linalg.norm(ra) * np.linalg.norm(rb)) - 1) < 1e-8


def test_lda_apply_and_serialize():
    es, labels = _two_class_axis0()
    t = fit_lda(es, labels, 1)
    out = apply_transform(es, t)
    assert out.dim == 1
    np.testing.assert_allclose(out.vectors, (es.vectors - t.mean) @ t.projection.T)
    text = save_lda(t)
    assert text.splitlines()[0] == b"LDA v1 1 3"
    back = load_lda(text)
    np.testing.assert_allclose(back.projection, t.projection, rtol=1e-8)
    with pytest.raises(DimMismatch):
        apply_transform(make_set([[1.0, 2.0]]), t)
    with pytest.raises(MalformedModel):
        load_lda(b"LDA v1 2 3\n0,0,0\n1,0,0\n")


def test_cosine_examples():
    A = cosine_affinity(make_set([[1, 0], [1, 0], [0, 2], [-1, 0]])).matrix
    assert A[0, 1] == 1 and A[0, 2] == 0 and A[0, 3] == -1
    with pytest.raises(ZeroVector):
        cosine_affinity(make_set([[1, 0], [0, 0]]))


@given(arrays(np.float64, (7, 5), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_cosine_invariants(x):
    if np.any(np.linalg.norm(x, axis=1) < 1e-100):
        return
    A = cosine_affinity(make_set(x)).matrix
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(A) == 1.0)
    assert A.min() >= -1 and A.max() <= 1


def test_center_subtracts_mean():
    out = center(make_set([[1.0, 2.0], [3.0, 6.0]]))
    np.testing.assert_allclose(out.vectors, [[-1, -2], [1, 2]])
