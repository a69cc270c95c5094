import os

import numpy as np
import pytest

from tremorsketch.augment import SPIRAL_PARAMS, augment_split
from tremorsketch.data import (generate_synthetic_dataset, ingest_dataset, load_split,
                               render_sketch, write_split)
from tremorsketch.errors import (AugmentationLeak, EmptyClass, InvalidParams, MissingDirectory,
                                 UnreadableImage)
from tremorsketch.pipeline import prepare_training_data, stratified_split

from oracles import roughness


def make_tree(root, n_train=36, n_test=15, drawing_type="spiral", size=24):
    write_split(root, drawing_type, "training",
                generate_synthetic_dataset(n_train, drawing_type, 3, seed=1))
    write_split(root, drawing_type, "testing",
                generate_synthetic_dataset(n_test, drawing_type, 3, seed=1, offset=n_train))


# -- ingestion -----------------------------------------------------------------------------
def test_ingest_counts(tmp_path):
    make_tree(tmp_path)
    train, test = ingest_dataset(tmp_path, "spiral")
    assert train.class_counts == {0: 36, 1: 36}
    assert test.class_counts == {0: 15, 1: 15}
    assert train.items[0].path.endswith(os.path.join("healthy", "healthy_0000.png"))
    assert [it.subject for it in test.items[:3]] == [0, 1, 2]
    assert {it.label for it in train.items if "parkinson" in it.path} == {1}


def test_ingest_deterministic(tmp_path):
    make_tree(tmp_path, 4, 2)
    assert ingest_dataset(tmp_path, "spiral") == ingest_dataset(tmp_path, "spiral")


def test_missing_parkinson_directory(tmp_path):
    write_split(tmp_path, "wave", "training", generate_synthetic_dataset(1, "wave", 0, 0)[:1])
    with pytest.raises(MissingDirectory, match="parkinson"):
        ingest_dataset(tmp_path, "wave")


def test_empty_class(tmp_path):
    make_tree(tmp_path, 2, 2)
    folder = tmp_path / "spiral" / "testing" / "parkinson"
    for f in folder.iterdir():
        f.unlink()
    with pytest.raises(EmptyClass):
        ingest_dataset(tmp_path, "spiral")


def test_unreadable_image(tmp_path):
    make_tree(tmp_path, 2, 2)
    (tmp_path / "spiral" / "training" / "healthy" / "healthy_0000.png").write_bytes(b"\x89PNG junk")
    train, _ = ingest_dataset(tmp_path, "spiral")
    with pytest.raises(UnreadableImage):
        load_split(train, 16)


def test_load_split_binarizes_and_resizes(tmp_path):
    make_tree(tmp_path, 3, 2)
    _, test = ingest_dataset(tmp_path, "spiral")
    split = load_split(test, 32)
    assert split.split == "testing" and len(split.items) == 4
    for img, _ in split.items:
        assert img.pixels.shape == (32, 32)
        assert set(np.unique(img.pixels)) <= {0, 255}


# -- augmentation hygiene ---------------------------------------------------------------------
def test_testing_split_is_never_augmented(tmp_path):
    make_tree(tmp_path, 3, 2)
    train, test = ingest_dataset(tmp_path, "spiral")
    test_split = load_split(test, 16)
    with pytest.raises(AugmentationLeak):
        augment_split(test_split, SPIRAL_PARAMS, 2, seed=0)
    with pytest.raises(AugmentationLeak):
        prepare_training_data(test_split, SPIRAL_PARAMS, 2, 0.2, seed=0)
    prepared = prepare_training_data(load_split(train, 16), SPIRAL_PARAMS, 2, 0.34, seed=0)
    # validation keeps originals only; the fit part grows by 1 + copies
    assert len(prepared.val[0]) == 2
    assert len(prepared.train[0]) == (6 - 2) * 3


def test_stratified_split():
    items = [(None, i % 2) for i in range(40)]
    fit, val = stratified_split(items, 0.2, seed=3)
    assert sorted(lbl for _, lbl in val) == [0] * 4 + [1] * 4
    assert len(fit) == 32
    again = stratified_split(items, 0.2, seed=3)
    assert [id(x) for x in again[1]] == [id(x) for x in val]


# -- synthetic generator ----------------------------------------------------------------------
def test_synthetic_deterministic_and_seed_sensitive():
    a = generate_synthetic_dataset(3, "spiral", 3, seed=7)
    b = generate_synthetic_dataset(3, "spiral", 3, seed=7)
    c = generate_synthetic_dataset(3, "spiral", 3, seed=8)
    assert all(x[0] == y[0] and x[1] == y[1] for x, y in zip(a, b))
    assert all(not (x[0] == z[0]) for x, z in zip(a, c))
    assert [lbl for _, lbl in a] == [0, 0, 0, 1, 1, 1]


def test_amplitude_zero_is_clean_curve():
    for kind in ("spiral", "wave"):
        clean = render_sketch(kind, np.random.default_rng([4, 2]), 0.0)
        twin = render_sketch(kind, np.random.default_rng([4, 2]), 0.0)
        shaky = render_sketch(kind, np.random.default_rng([4, 2]), 3.0)
        assert clean == twin
        assert not (clean == shaky)


def test_amplitude_zero_classes_not_separable():
    d = generate_synthetic_dataset(40, "wave", 0, seed=2)
    v = np.array([roughness(img) for img, _ in d])
    y = np.array([lbl for _, lbl in d])
    assert abs(v[y == 0].mean() - v[y == 1].mean()) < 0.05


@pytest.mark.parametrize("kind", ["spiral", "wave"])
def test_amplitude_three_separable_by_roughness(kind):
    fit = generate_synthetic_dataset(50, kind, 3, seed=11)
    v = np.array([roughness(img) for img, _ in fit])
    y = np.array([lbl for _, lbl in fit])
    thresh = (v[y == 0].mean() + v[y == 1].mean()) / 2
    sign = 1 if v[y == 1].mean() > thresh else -1
    held = generate_synthetic_dataset(50, kind, 3, seed=12)
    hv = np.array([roughness(img) for img, _ in held])
    hy = np.array([lbl for _, lbl in held])
    acc = np.mean((sign * (hv - thresh) > 0) == (hy == 1))
    assert acc >= 0.95


def test_synthetic_errors():
    with pytest.raises(InvalidParams):
        generate_synthetic_dataset(0, "spiral", 1, 0)
    with pytest.raises(InvalidParams):
        generate_synthetic_dataset(1, "spiral", -1, 0)
    with pytest.raises(InvalidParams):
        generate_synthetic_dataset(1, "circle", 1, 0)
