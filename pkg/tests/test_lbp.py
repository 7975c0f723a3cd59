import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from lrface.errors import ValidationError
from lrface.imgcore import Image, resize_planes
from lrface.lbp import (MSLBP_SIZES, Landmarks, block_histograms, extract_highdim_lbp, extract_lbp,
                        extract_mslbp, lbp_code_image, pca_fit, pca_project, uniform_bin)


def test_uniform_table_matches_transition_oracle():
    uniform = [c for c in range(256) if oracles.transitions(c) <= 2]
    assert len(uniform) == 58
    for b, code in enumerate(uniform):
        assert uniform_bin(code) == b
    for code in set(range(256)) - set(uniform):
        assert uniform_bin(code) == 58


def test_uniform_examples():
    assert uniform_bin(0b00000000) < 58
    assert uniform_bin(0b01010101) == 58
    with pytest.raises(ValidationError):
        uniform_bin(256)


def test_constant_image_codes_all_255(backend):
    assert np.all(lbp_code_image(np.full((9, 11), 0.42)) == 255)


def test_strict_local_maximum_gives_code_0(backend):
    plane = np.zeros((9, 9))
    plane[4, 4] = 1.0
    assert lbp_code_image(plane)[4, 4] == 0


@pytest.mark.parametrize("bright,expected", [(1.0, 0b00000010), (0.8, 0)])
def test_hand_built_diagonal_neighbour(backend, bright, expected):
    # neighbour 1 sits at (3 + sqrt2, 3 - sqrt2); pixel (x=4, y=2) weighs (2 - sqrt2)^2 = 0.3431
    plane = np.zeros((7, 7))
    plane[3, 3] = 0.3
    plane[2, 4] = bright
    assert lbp_code_image(plane)[3, 3] == expected


def test_linear_ramp_code(backend):
    # bilinear sampling is exact on a plane: neighbour - centre = 2cos(t) - 20 sin(t)
    yy, xx = np.mgrid[0:7, 0:7]
    plane = (xx + 10 * yy) / 100.0
    assert lbp_code_image(plane)[3, 3] == 1 + 32 + 64 + 128


def test_codes_match_scalar_oracle(backend, rng):
    plane = rng.random((12, 10))
    codes = lbp_code_image(plane)
    ref = [[oracles.lbp_code_at(plane.tolist(), y, x) for x in range(10)] for y in range(12)]
    assert np.array_equal(codes, np.array(ref))


def test_lbp_rejects_multichannel_and_tiny(rng):
    with pytest.raises(ValidationError):
        lbp_code_image(Image(rng.random((3, 9, 9))))
    with pytest.raises(ValidationError):
        lbp_code_image(np.zeros((4, 9)))


def test_block_histograms_90x90():
    fv = block_histograms(np.zeros((90, 90), dtype=np.uint8), 9, 9)
    assert len(fv) == 5900 and len(fv.layout) == 100
    for i in range(100):
        seg = fv.segment(i)
        assert seg[uniform_bin(0)] == 81 and seg.sum() == 81


def test_block_histograms_match_counting(rng):
    codes = rng.integers(0, 256, (18, 18)).astype(np.uint8)
    fv = block_histograms(codes, 9, 9)
    for i, (br, bc) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        expect = np.zeros(59)
        for y in range(9):
            for x in range(9):
                code = int(codes[br * 9 + y, bc * 9 + x])
                expect[sum(1 for c in range(code) if oracles.transitions(c) <= 2)
                       if oracles.transitions(code) <= 2 else 58] += 1
        assert np.array_equal(fv.segment(i), expect)
        assert fv.layout[i][:3] == (0, br, bc)


def test_block_histograms_non_divisible():
    with pytest.raises(ValidationError):
        block_histograms(np.zeros((20, 18), dtype=np.uint8), 9, 9)


def test_extract_lbp_geometry(backend, rng):
    fv = extract_lbp(rng.random((90, 90)))
    assert len(fv) == 5900 and len(fv.layout) == 100
    assert np.all(fv.segment_sums() == 81)


def test_extract_lbp_constant(backend):
    fv = extract_lbp(np.full((90, 90), 0.7))
    for i in range(100):
        assert fv.segment(i)[uniform_bin(255)] == 81


def test_extract_lbp_is_composition(backend, rng):
    plane = rng.random((90, 90))
    fv = extract_lbp(plane)
    assert np.array_equal(fv.values, block_histograms(lbp_code_image(plane), 9, 9).values)


def test_extract_lbp_wrong_size(rng):
    with pytest.raises(ValidationError):
        extract_lbp(rng.random((91, 90)))


def test_extract_mslbp_geometry(backend, rng):
    fv = extract_mslbp(rng.random((90, 90)))
    assert len(fv) == 12980 and len(fv.layout) == 220
    per_scale = [sum(1 for s in fv.layout if s.scale == k) for k in range(5)]
    assert per_scale == [100, 64, 36, 16, 4]
    assert np.all(fv.segment_sums() == 81)


def test_extract_mslbp_constant(backend):
    fv = extract_mslbp(np.full((90, 90), 0.25))
    first = fv.segment(0)
    assert all(np.array_equal(fv.segment(i), first) for i in range(220))
    assert first.max() == 81


def test_mslbp_scales_are_resized_copies(backend, rng):
    plane = rng.random((90, 90))
    fv = extract_mslbp(plane)
    small = np.clip(resize_planes(plane[None], 36, 36)[0], 0, 1)
    ref = block_histograms(lbp_code_image(small), 9, 9)
    start = (100 + 64 + 36) * 59
    assert np.array_equal(fv.values[start:start + 16 * 59], ref.values)
    assert MSLBP_SIZES == (90, 72, 54, 36, 18)


def landmarks_around(rng, centre=150.0, spread=100.0):
    return Landmarks(rng.uniform(centre - spread, centre + spread, (27, 2)))


def test_highdim_geometry(backend, rng):
    fv = extract_highdim_lbp(rng.random((300, 300)), landmarks_around(rng))
    assert len(fv) == 127440 == 59 * 16 * 27 * 5
    assert np.all(fv.segment_sums() == 100)


def test_highdim_constant(backend):
    fv = extract_highdim_lbp(np.full((300, 300), 0.5), Landmarks(np.full((27, 2), 150.0)))
    assert all(fv.segment(i)[uniform_bin(255)] == 100 for i in range(len(fv.layout)))


def test_highdim_border_landmarks_clamped(backend, rng):
    pts = np.array([[0, 0], [299, 299], [-5, 150]] + [[150, 150]] * 24, dtype=float)
    fv = extract_highdim_lbp(rng.random((300, 300)), Landmarks(pts))
    assert np.all(fv.segment_sums() == 100)


def _patch_oracle(plane, cx, cy):
    size = len(plane)
    x0 = min(max(int(math.floor(cx + 0.5)) - 20, 0), size - 40)
    y0 = min(max(int(math.floor(cy + 0.5)) - 20, 0), size - 40)
    uniform = [c for c in range(256) if oracles.transitions(c) <= 2]
    hists = []
    for by in range(4):
        for bx in range(4):
            h = [0] * 59
            for y in range(y0 + by * 10, y0 + by * 10 + 10):
                for x in range(x0 + bx * 10, x0 + bx * 10 + 10):
                    code = oracles.lbp_code_at(plane, y, x)
                    h[uniform.index(code) if code in uniform else 58] += 1
            hists.extend(h)
    return hists


def test_highdim_centre_patch_matches_oracle(backend):
    rng = np.random.default_rng(77)
    plane = rng.random((300, 300))
    fv = extract_highdim_lbp(plane, Landmarks(np.full((27, 2), 149.5)))
    ref = _patch_oracle(plane.tolist(), 149.5, 149.5)
    assert np.array_equal(fv.values[:16 * 59], ref)
    # last scale: 150x150 frame, landmark maps to (149.5 + 0.5) / 2 - 0.5
    small = np.clip(resize_planes(plane[None], 150, 150)[0], 0, 1)
    ref_small = _patch_oracle(small.tolist(), 74.5, 74.5)
    seg = 4 * 27 * 16
    assert np.array_equal(fv.values[seg * 59:(seg + 16) * 59], ref_small)


def test_highdim_errors(rng):
    with pytest.raises(ValidationError):
        Landmarks(np.zeros((26, 2)))
    with pytest.raises(ValidationError):
        extract_highdim_lbp(rng.random((250, 250)), Landmarks(np.zeros((27, 2))))


@pytest.mark.parametrize("scale", [0.5, 2.0, 4.0, 0.125])
def test_lbp_invariant_to_power_of_two_gain(backend, rng, scale):
    plane = rng.random((90, 90))
    assert extract_lbp(plane) == extract_lbp(plane * scale)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.2, 5.0))
def test_grid_aligned_bits_invariant_to_monotone_remap(seed, gamma):
    plane = np.random.default_rng(seed).random((20, 20))
    a = lbp_code_image(plane) & 0b01010101
    b = lbp_code_image(plane ** gamma) & 0b01010101
    assert np.array_equal(a, b)


def test_extraction_deterministic(rng):
    plane = rng.random((90, 90))
    a, b = extract_mslbp(plane), extract_mslbp(plane.copy())
    assert a.values.tobytes() == b.values.tobytes()


def test_backends_agree_exactly(rng):
    from lrface import kernels
    if len(kernels.available()) < 2:
        pytest.skip("compiled backend not built")
    plane = rng.random((90, 90))
    plane[30:40, 30:40] = 0.5
    out = {}
    for name in kernels.available():
        with kernels.using(name):
            out[name] = extract_mslbp(plane).values
    assert np.array_equal(out["python"], out["cython"])


# -- PCA -----------------------------------------------------------------------

def test_pca_exact_subspace(rng):
    basis = np.linalg.qr(rng.normal(size=(30, 2)))[0]
    data = rng.normal(size=(10, 2)) @ basis.T + 3.0
    model = pca_fit(list(data), out_dim=2)
    for v in data:
        recon = model.mean + model.basis @ pca_project(model, v).values
        assert np.max(np.abs(recon - v)) <= 1e-8


def test_pca_preserves_in_subspace_distances(rng):
    basis = np.linalg.qr(rng.normal(size=(40, 3)))[0]
    data = rng.normal(size=(12, 3)) @ basis.T
    model = pca_fit(list(data), out_dim=3)
    proj = np.array([pca_project(model, v).values for v in data])
    for i in range(12):
        for j in range(12):
            assert abs(np.linalg.norm(proj[i] - proj[j]) - np.linalg.norm(data[i] - data[j])) <= 1e-9


def test_pca_orthonormal_and_signed(rng):
    model = pca_fit(list(rng.random((25, 50))), out_dim=20)
    gram = model.basis.T @ model.basis
    assert np.max(np.abs(gram - np.eye(20))) <= 1e-6
    piv = np.argmax(np.abs(model.basis), axis=0)
    assert np.all(model.basis[piv, np.arange(20)] > 0)


def test_pca_project_examples(rng):
    model = pca_fit(list(rng.random((15, 30))), out_dim=5)
    assert np.allclose(pca_project(model, model.mean).values, 0.0, atol=1e-12)
    e2 = pca_project(model, model.mean + model.basis[:, 2]).values
    np.testing.assert_allclose(e2, np.eye(5)[2], atol=1e-12)
    v = rng.random(30)
    p = pca_project(model, v).values
    for k in range(5):
        assert p[k] == pytest.approx(sum(model.basis[i, k] * (v[i] - model.mean[i]) for i in range(30)), abs=1e-6)


def test_pca_errors(rng):
    with pytest.raises(ValidationError):
        pca_fit(list(rng.random((400, 500))), out_dim=400)
    with pytest.raises(ValidationError):
        pca_fit([np.zeros(5), np.zeros(6), np.zeros(5)], out_dim=1)
    model = pca_fit(list(rng.random((5, 8))), out_dim=2)
    with pytest.raises(ValidationError):
        pca_project(model, np.zeros(9))


def test_pca_default_400_dims(rng):
    model = pca_fit(list(rng.random((401, 500))))
    assert model.output_dim == 400 and model.input_dim == 500
