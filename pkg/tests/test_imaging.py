import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reconfmem.imaging import (FEATURE_NAMES, N_FEATURES, ClassHint, FeatureScaler, LesionCandidate,
                               binarize, connected_components, dilate, erode, extract_features,
                               find_candidates, morph_close, morph_open)

GOLDEN = Path(__file__).with_name("golden_features.json")


def test_binarize_cases():
    assert not binarize(np.zeros((4, 4)), 0.5).any()
    assert binarize(np.zeros((4, 4)), 0.0).all()
    img = np.array([[0.0, 0.2, 0.4, 0.6, 0.8]] * 5)
    img[2, 2] = 0.5
    want = np.array([[0, 0, 0, 1, 1]] * 5, bool)
    want[2, 2] = True
    assert np.array_equal(binarize(img, 0.5), want)
    with pytest.raises(ValueError):
        binarize(img, 1.5)


def _brute(binary, r, op):
    H, W = binary.shape
    out = np.zeros_like(binary)
    for i in range(H):
        for j in range(W):
            vals = [binary[a, b] if 0 <= a < H and 0 <= b < W else False
                    for a in range(i - r, i + r + 1) for b in range(j - r, j + r + 1)]
            out[i, j] = op(vals)
    return out


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("r", [1, 2])
def test_morphology_matches_set_definition(seed, r):
    b = np.random.default_rng(seed).random((16, 16)) < 0.55
    e, d = _brute(b, r, all), _brute(b, r, any)
    assert np.array_equal(erode(b, r), e)
    assert np.array_equal(dilate(b, r), d)
    assert np.array_equal(morph_open(b, r), _brute(e, r, any))
    assert np.array_equal(morph_close(b, r), _brute(d, r, all))


def test_open_drops_speckle_close_fills_hole():
    b = np.zeros((9, 9), bool)
    b[4, 4] = True
    assert not morph_open(b, 1).any()
    b = np.zeros((9, 9), bool)
    b[2:7, 2:7] = True
    b[4, 4] = False
    assert morph_close(b, 1)[4, 4]
    assert np.array_equal(morph_open(b, 0), b)


def _flood_fill_count(b):
    seen = np.zeros_like(b)
    H, W = b.shape
    n = 0
    for i in range(H):
        for j in range(W):
            if b[i, j] and not seen[i, j]:
                n += 1
                stack = [(i, j)]
                seen[i, j] = True
                while stack:
                    a, c = stack.pop()
                    for da in (-1, 0, 1):
                        for dc in (-1, 0, 1):
                            x, y = a + da, c + dc
                            if 0 <= x < H and 0 <= y < W and b[x, y] and not seen[x, y]:
                                seen[x, y] = True
                                stack.append((x, y))
    return n


@pytest.mark.parametrize("seed", range(5))
def test_components_match_flood_fill(seed):
    b = np.random.default_rng(seed).random((32, 32)) < 0.3
    cands = connected_components(b)
    assert len(cands) == _flood_fill_count(b)
    assert sum(c.area for c in cands) == b.sum()
    firsts = [min(r * 32 + c for r, c in zip(k.rows, k.cols)) for k in cands]
    assert firsts == sorted(firsts)


def test_components_trivial():
    assert connected_components(np.zeros((5, 5), bool)) == []
    b = np.zeros((6, 6), bool)
    b[0:2, 0:2] = True
    b[4:6, 3:6] = True
    cands = connected_components(b, ClassHint.RED)
    assert [c.area for c in cands] == [4, 6]
    assert all(c.class_hint is ClassHint.RED for c in cands)


def test_find_candidates_bright_and_red():
    img = np.full((40, 40, 3), 0.5)
    img[5:10, 5:10] = 0.95
    img[25:30, 20:26] = 0.1
    img[35, 35] = 0.95  # speckle, removed by opening
    cands = find_candidates(img)
    assert [c.class_hint for c in cands] == [ClassHint.BRIGHT, ClassHint.RED]
    assert [c.area for c in cands] == [25, 30]
    assert [c.cid for c in cands] == [0, 1]


def _square_candidate(r0, c0, n=4):
    rr, cc = np.mgrid[r0:r0 + n, c0:c0 + n]
    return LesionCandidate(rr.ravel(), cc.ravel())


def test_square_on_uniform_image():
    img = np.full((30, 30, 3), 0.4)
    fv = extract_features(img, _square_candidate(10, 10))
    f = dict(zip(FEATURE_NAMES, fv.values))
    assert f["area"] == 16 and f["perimeter"] == 16
    assert f["compactness"] == pytest.approx(1.0)
    assert f["roundness"] == pytest.approx(math.pi / 4)
    assert f["extent"] == 1.0 and f["eccentricity"] == pytest.approx(0.0)
    assert f["holes"] == 0 and f["boundary_pixels"] == 12 and f["interior_pixels"] == 4
    for ch in "rgb":
        assert f[f"{ch}_std"] == 0.0 and f[f"{ch}_mean"] == pytest.approx(0.4)
    assert all(f[n] == pytest.approx(0.0, abs=1e-12) for n in FEATURE_NAMES if n.startswith("s"))


def test_single_pixel_conventions():
    img = np.full((10, 10), 0.3)
    f = dict(zip(FEATURE_NAMES, extract_features(img, LesionCandidate([5], [5])).values))
    assert f["area"] == 1 and f["perimeter"] == 4
    assert f["compactness"] == 1.0
    assert f["mu20"] == 0.0 and f["eccentricity"] == 0.0 and f["interior_pixels"] == 0


def _textured(seed=0, shape=(40, 40)):
    rng = np.random.default_rng(seed)
    return np.clip(0.5 + 0.1 * rng.standard_normal(shape + (3,)), 0, 1)


def test_translation_invariance():
    img = _textured()
    big = np.full((50, 50, 3), 0.5)
    big[3:43, 5:45] = img
    cand = LesionCandidate([15, 15, 16, 16, 17], [15, 16, 15, 16, 17])
    moved = LesionCandidate(cand.rows + 3, cand.cols + 5)
    assert np.array_equal(extract_features(img, cand).values, extract_features(big, moved).values)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_any_candidate_gives_81_finite_values(seed, n_px):
    rng = np.random.default_rng(seed)
    img = rng.random((24, 24, 3))
    rows, cols = rng.integers(0, 24, n_px), rng.integers(0, 24, n_px)
    fv = extract_features(img, LesionCandidate(rows, cols))
    assert fv.values.shape == (N_FEATURES,) and np.all(np.isfinite(fv.values))
    assert np.array_equal(fv.values, extract_features(img, LesionCandidate(rows, cols)).values)


def test_candidate_outside_image():
    with pytest.raises(ValueError):
        extract_features(np.zeros((5, 5)), LesionCandidate([6], [0]))


def _golden_vector():
    img = _textured(seed=7)
    img[12:18, 10:19, 0] = 0.2
    cand = LesionCandidate(*np.nonzero(np.add.outer(np.arange(40) - 15, np.zeros(40)) ** 2
                                       + np.add.outer(np.zeros(40), np.arange(40) - 14) ** 2 / 2 <= 9))
    return extract_features(img, cand).values


def test_golden_features():
    values = _golden_vector()
    ref = json.loads(GOLDEN.read_text())
    assert ref["names"] == list(FEATURE_NAMES)
    assert values == pytest.approx(ref["values"], rel=1e-9, abs=1e-12)


def test_feature_roster_split():
    assert len(FEATURE_NAMES) == len(set(FEATURE_NAMES)) == 81
    assert sum(not n.startswith(("r_", "g_", "b_", "ring_", "s0_", "s1_", "s2_")) for n in FEATURE_NAMES) == 27


def test_scaler_round_trip():
    x = np.array([[0.0, 5.0], [2.0, 5.0], [1.0, 5.0]])
    sc = FeatureScaler().fit(x)
    assert sc.transform(x)[:, 0].tolist() == [0.0, 1.0, 0.5]
    assert sc.transform(x)[:, 1].tolist() == [0.0] * 3
    back = FeatureScaler.from_dict(sc.as_dict())
    assert np.array_equal(back.transform(x), sc.transform(x))
    with pytest.raises(RuntimeError):
        FeatureScaler().transform(x)
