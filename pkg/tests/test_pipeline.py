import numpy as np
import pytest

from tofcorner.errors import InsufficientData
from tofcorner.pipeline import (
    build_training_matrix,
    frame_rows,
    generate_dataset,
    render_dataset,
    scene_seed,
    split_images,
)
from tofcorner.tofsim import FrameSet, ToFConfig


def test_scene_seed_distinct():
    seeds = {scene_seed(42, i) for i in range(10_000)}
    assert len(seeds) == 10_000


def test_split_images_deterministic_and_disjoint():
    names = [f"scene_{i:06d}" for i in range(20)]
    a_train, a_test = split_images(names, 15, 3)
    b_train, b_test = split_images(list(reversed(names)), 15, 3)
    assert a_train == b_train and a_test == b_test
    assert not set(a_train) & set(a_test)
    assert len(a_train) == 15 and len(a_test) == 5
    c_train, _ = split_images(names, 15, 4)
    assert c_train != a_train


def test_split_images_needs_spare_frames():
    with pytest.raises(InsufficientData):
        split_images([f"s{i}" for i in range(5)], 5, 0)


def test_frame_rows_valid_pixels_only(small_dataset):
    path = sorted((small_dataset / "frames").glob("*.tfim"))[0]
    fs = FrameSet.load(path)
    x, y, layout = frame_rows(fs)
    n_valid = int((fs.valid & (fs.ground_truth > 0)).sum())
    assert x.shape == (n_valid, 39)
    assert y.shape == (n_valid,)
    assert len(layout) == 39
    # residual targets: gt - depth
    mask = fs.valid & (fs.ground_truth > 0)
    assert np.allclose(y, (fs.ground_truth - fs.depth)[mask])


def test_build_training_matrix_pixel_fraction(small_dataset):
    paths = sorted((small_dataset / "frames").glob("*.tfim"))[:2]
    x_full, y_full, _ = build_training_matrix(paths)
    x_half, y_half, _ = build_training_matrix(paths, pixel_fraction=0.5, seed=1)
    assert abs(x_half.shape[0] - x_full.shape[0] / 2) <= 2
    x_half2, _, _ = build_training_matrix(paths, pixel_fraction=0.5, seed=1)
    assert np.array_equal(x_half, x_half2)


def test_render_dataset_parallel_matches_serial(tmp_path):
    scenes = tmp_path / "scenes"
    generate_dataset("simple", 4, 11, scenes, resolution=(24, 24))
    out_a = tmp_path / "serial"
    out_b = tmp_path / "parallel"
    cfg = ToFConfig(bounce_samples=9)
    render_dataset(scenes, out_a, cfg, n_jobs=1)
    render_dataset(scenes, out_b, cfg, n_jobs=2)
    for p in sorted(out_a.glob("*")):
        assert p.read_bytes() == (out_b / p.name).read_bytes()


def test_generate_challenging2_count(tmp_path):
    paths = generate_dataset("challenging2", 5, 1, tmp_path / "c2",
                             resolution=(16, 16))
    assert len(paths) == 5
    from tofcorner.scene import SceneKind, load_manifest

    for p in paths:
        sc = load_manifest(p)[0]
        assert sc.kind == SceneKind.TWO_PLANE
        assert len({m.sigma for m in sc.materials}) == 2
