import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from lrface.errors import ValidationError
from lrface.matcher import (DistanceMatrix, chi_square, distance_matrix, rank_gallery,
                            read_matrix_csv, write_matrix_csv)

HAND_CASES = [
    ([1, 0], [0, 1], 2.0),
    ([2, 0, 0], [0, 0, 0], 2.0),
    ([0, 0], [0, 0], 0.0),
    ([3], [1], 1.0),
    ([1, 1], [1, 1], 0.0),
    ([4, 0], [0, 4], 8.0),
    ([1, 2, 3], [3, 2, 1], 2.0),
    ([5, 0, 1], [0, 0, 1], 5.0),
    ([0.5, 0.5], [0, 1], 0.5 + 0.25 / 1.5),
    ([10, 0, 0, 2], [0, 6, 0, 2], 16.0),
    ([81, 0], [0, 81], 162.0),
    ([2, 2], [6, 2], 2.0),
]


@pytest.mark.parametrize("x,y,expected", HAND_CASES)
def test_hand_values(x, y, expected):
    assert chi_square(np.array(x, float), np.array(y, float)) == pytest.approx(expected, rel=1e-12)


def test_chi_square_errors():
    with pytest.raises(ValidationError):
        chi_square(np.zeros(3), np.zeros(4))
    with pytest.raises(ValidationError):
        chi_square(np.array([1.0, -1.0]), np.zeros(2))


hist = st.lists(st.floats(0, 100), min_size=1, max_size=30)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31), st.floats(0.01, 100))
def test_symmetry_zero_self_homogeneity(n, seed, alpha):
    r = np.random.default_rng(seed)
    x = r.random(n) * (r.random(n) > 0.3)
    y = r.random(n) * (r.random(n) > 0.3)
    d = chi_square(x, y)
    assert d == chi_square(y, x)
    assert chi_square(x, x) == 0.0
    assert chi_square(alpha * x, alpha * y) == pytest.approx(alpha * d, rel=1e-9, abs=1e-300)


def test_distance_matrix_examples(backend):
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    dm = distance_matrix([a, b], [a, b])
    np.testing.assert_array_equal(dm.values, [[0, 2], [2, 0]])


def test_distance_matrix_matches_scalar(backend, rng):
    probes = [rng.random(20) * (rng.random(20) > 0.4) for _ in range(5)]
    gallery = [rng.random(20) * (rng.random(20) > 0.4) for _ in range(7)]
    dm = distance_matrix(probes, gallery)
    assert dm.values.shape == (5, 7)
    for i in range(5):
        for j in range(7):
            assert dm.values[i, j] == pytest.approx(oracles.chi2(probes[i], gallery[j]), rel=1e-12, abs=1e-15)


def test_identical_lists_symmetric_zero_diagonal(backend, rng):
    vecs = [rng.integers(0, 9, 59).astype(float) for _ in range(6)]
    dm = distance_matrix(vecs, vecs)
    assert np.all(np.diag(dm.values) == 0)
    np.testing.assert_allclose(dm.values, dm.values.T, rtol=1e-14)


def test_distance_matrix_errors():
    with pytest.raises(ValidationError):
        distance_matrix([], [np.zeros(3)])
    with pytest.raises(ValidationError):
        distance_matrix([np.zeros(3)], [np.zeros(4)])
    with pytest.raises(ValidationError):
        distance_matrix([np.zeros(3)], [np.zeros(3)], metric="cosine")


def test_l2_metric(rng):
    p, g = rng.normal(size=(3, 5)), rng.normal(size=(4, 5))
    dm = distance_matrix(list(p), list(g), metric="l2")
    np.testing.assert_allclose(dm.values, np.linalg.norm(p[:, None] - g[None], axis=2), atol=1e-12)


def test_rank_gallery_examples():
    assert list(rank_gallery([3, 1, 2])) == [1, 2, 0]
    assert list(rank_gallery([5, 5, 5, 5])) == [0, 1, 2, 3]
    with pytest.raises(ValidationError):
        rank_gallery([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=25))
def test_rank_matches_stable_sort(row):
    assert list(rank_gallery(row)) == sorted(range(len(row)), key=lambda j: (row[j], j))


def test_ranking_invariant_to_uniform_scaling(rng):
    probes = [rng.random(30) for _ in range(4)]
    gallery = [rng.random(30) for _ in range(6)]
    a = distance_matrix(probes, gallery)
    b = distance_matrix([3.7 * p for p in probes], [3.7 * g for g in gallery])
    for ra, rb in zip(a.values, b.values):
        assert list(rank_gallery(ra)) == list(rank_gallery(rb))


def test_matrix_csv_roundtrip(tmp_path, rng):
    dm = DistanceMatrix(rng.random((3, 4)), ("p1", "p2", "p3"), ("a", "b", "c", "d"))
    write_matrix_csv(dm, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "probe_id,a,b,c,d"
    assert read_matrix_csv(tmp_path / "m.csv") == dm


def test_matrix_rejects_negative():
    with pytest.raises(ValidationError):
        DistanceMatrix(np.array([[-1.0]]))


def test_backends_agree(rng):
    from lrface import kernels
    p, g = rng.random((4, 300)), rng.random((5, 300))
    p[p < 0.3] = 0
    results = []
    for name in kernels.available():
        with kernels.using(name):
            results.append(kernels.chi2_matrix(p, g))
    for r in results[1:]:
        np.testing.assert_allclose(r, results[0], rtol=1e-12)
