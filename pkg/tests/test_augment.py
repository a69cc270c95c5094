import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tremorsketch.augment import (SPIRAL_PARAMS, WAVE_PARAMS, AffineTransform, AugmentParams,
                                  apply_affine, expand_dataset, expansion_sources, make_transform,
                                  sample_transform, write_augmented)
from tremorsketch.errors import InvalidParams, SingularTransform
from tremorsketch.imageproc import GrayImage, read_image


def test_table_values():
    assert (SPIRAL_PARAMS.rotation_range, SPIRAL_PARAMS.zoom_range) == (5, 0.2)
    assert WAVE_PARAMS.rotation_range == 10
    for p in (SPIRAL_PARAMS, WAVE_PARAMS):
        assert (p.width_shift_range, p.height_shift_range, p.shear_range) == (0.1, 0.1, 0.1)
        assert p.rescale == 1 / 255


def test_spiral_angle_within_range():
    for seed in range(200):
        t = sample_transform(SPIRAL_PARAMS, np.random.default_rng(seed), 64, 64)
        assert -5 <= t.angle <= 5


def test_zero_ranges_give_identity():
    t = sample_transform(AugmentParams(), np.random.default_rng(0), 10, 10)
    np.testing.assert_array_equal(t.matrix, [[1, 0, 0], [0, 1, 0]])


def test_same_seed_same_transform():
    a = sample_transform(WAVE_PARAMS, np.random.default_rng(9), 32, 32)
    b = sample_transform(WAVE_PARAMS, np.random.default_rng(9), 32, 32)
    assert a.matrix.tobytes() == b.matrix.tobytes()


def test_invalid_params():
    with pytest.raises(InvalidParams):
        AugmentParams(rotation_range=-1).validate()
    with pytest.raises(InvalidParams):
        AugmentParams(rotation_range=181).validate()


def test_identity_apply_is_bit_exact():
    pix = np.random.default_rng(1).integers(0, 256, size=(7, 9))
    out = apply_affine(GrayImage(pix), make_transform(9, 7))
    assert out.pixels.tobytes() == GrayImage(pix).pixels.tobytes()


def test_rotate_90_single_pixel():
    pix = np.full((3, 3), 255)
    pix[0, 1] = 0  # x=1, y=0
    out = apply_affine(GrayImage(pix), make_transform(3, 3, angle=90))
    # about centre (1, 1): offset (0, -1) -> rotate [[0,-1],[1,0]] -> (1, 0) -> x=2, y=1
    expected = np.full((3, 3), 255)
    expected[1, 2] = 0
    assert out.pixels.tolist() == expected.tolist()


def test_shift_right_fills_first_column():
    pix = np.arange(12).reshape(3, 4)
    out = apply_affine(GrayImage(pix), make_transform(4, 3, shift_x=1), fill=200)
    assert out.pixels[:, 0].tolist() == [200, 200, 200]
    assert out.pixels[:, 1:].tolist() == pix[:, :3].tolist()


def test_singular_transform():
    t = AffineTransform(np.zeros((2, 3)))
    with pytest.raises(SingularTransform):
        apply_affine(GrayImage(np.zeros((2, 2))), t)


def _items(n, size=12):
    rng = np.random.default_rng(3)
    return [(GrayImage(rng.integers(0, 256, size=(size, size))), i % 2) for i in range(n)]


def test_expand_zero_copies():
    items = _items(10)
    out = expand_dataset(items, SPIRAL_PARAMS, 0, seed=1)
    assert len(out) == 10
    assert all(a[0] == b[0] and a[1] == b[1] for a, b in zip(items, out))


def test_expand_counts_and_balance():
    items = _items(36)
    out = expand_dataset(items, SPIRAL_PARAMS, 9, seed=1)
    assert len(out) == 360
    labels = [lbl for _, lbl in out]
    assert labels.count(0) == labels.count(1) == 180
    # originals kept in front of their copies
    assert all(out[10 * i][0] == items[i][0] for i in range(36))


def test_expand_deterministic_and_worker_invariant():
    items = _items(8)
    a = expand_dataset(items, WAVE_PARAMS, 3, seed=5)
    b = expand_dataset(items, WAVE_PARAMS, 3, seed=5)
    c = expand_dataset(items, WAVE_PARAMS, 3, seed=5, workers=3)
    for x, y, z in zip(a, b, c):
        assert x[0] == y[0] == z[0]
    d = expand_dataset(items, WAVE_PARAMS, 3, seed=6)
    assert any(not (x[0] == w[0]) for x, w in zip(a, d))


def test_expand_independent_of_item_order_beyond_index():
    # copies depend only on (seed, index, copy): the same image at the same index
    # augments identically even if other items change
    items = _items(4)
    other = list(items)
    other[3] = _items(5)[4]
    a = expand_dataset(items, SPIRAL_PARAMS, 2, seed=2)
    b = expand_dataset(other, SPIRAL_PARAMS, 2, seed=2)
    assert all(a[k][0] == b[k][0] for k in range(9))


def test_sampled_parameters_stay_in_range():
    rng = np.random.default_rng(0)
    for params in (SPIRAL_PARAMS, WAVE_PARAMS):
        for _ in range(10_000):
            t = sample_transform(params, rng, 64, 48)
            assert -params.rotation_range <= t.angle <= params.rotation_range
            assert 1 - params.zoom_range <= t.zoom <= 1 + params.zoom_range
            assert abs(t.shift_x) <= params.width_shift_range * 64
            assert abs(t.shift_y) <= params.height_shift_range * 48
            assert abs(t.shear) <= params.shear_range


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(4, 20))
def test_augmenting_binary_image_stays_binary(seed, size):
    pix = np.where(np.random.default_rng(seed).random((size, size)) > 0.7, 0, 255)
    t = sample_transform(WAVE_PARAMS, np.random.default_rng(seed), size, size)
    out = apply_affine(GrayImage(pix), t)
    assert set(np.unique(out.pixels)) <= {0, 255}


def test_write_augmented_manifest(tmp_path):
    items = _items(2)
    out = expand_dataset(items, SPIRAL_PARAMS, 2, seed=0)
    manifest = write_augmented(out, tmp_path, expansion_sources(2, 2))
    lines = open(manifest).read().splitlines()
    assert len(lines) == 6
    name, label, src, copy = lines[4].split()
    assert (label, src, copy) == ("1", "1", "1")
    assert read_image(tmp_path / name) == out[4][0]
