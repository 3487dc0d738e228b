import math

import numpy as np
import pytest

from tofcorner.errors import DimensionMismatch
from tofcorner.features import (
    CONFIDENCE_AMPLITUDE_DEPTH,
    FeatureTensor,
    confidence,
    extract,
    feature_layout,
)
from tofcorner.scene import builtin_materials, CornerScene, SceneKind
from tofcorner.tofsim import FrameSet, ToFConfig, render


def _frames(h=21, w=21, depth=None, intensity=None, amplitude=None):
    depth = np.full((h, w), 3.0) if depth is None else depth
    intensity = np.full((h, w), 0.5) if intensity is None else intensity
    amplitude = np.full((h, w), 0.4) if amplitude is None else amplitude
    return FrameSet(depth=depth, amplitude=amplitude, intensity=intensity,
                    ground_truth=depth.copy(), valid=np.ones((h, w), bool))


def test_layout_counts():
    assert len(feature_layout()) == 39
    assert len(feature_layout(include_norm_y=False)) == 38
    assert feature_layout()[:5] == ["intensity", "depth", "amplitude",
                                    "radial_distance", "confidence"]
    assert feature_layout()[-2:] == ["norm_x", "norm_y"]
    assert len(set(feature_layout())) == 39


def test_confidence_literal_is_constant_one():
    for d in (0.0, 3.0, 123.456, 7.2e5):
        assert confidence(d) == 1.0
    arr = np.linspace(0.0, 10.0, 1000)
    assert np.all(confidence(arr) == 1.0)


def test_confidence_alternative_mode_varies():
    d = np.array([1.0, 2.0, 3.0])
    a = np.array([0.5, 0.5, 0.5])
    out = confidence(d, mode=CONFIDENCE_AMPLITUDE_DEPTH, amplitude=a)
    assert out.shape == (3,)
    assert len(np.unique(out)) > 1
    with pytest.raises(ValueError):
        confidence(d, mode=CONFIDENCE_AMPLITUDE_DEPTH)
    with pytest.raises(ValueError):
        confidence(d, mode="bogus")


def test_extract_shapes_and_layout():
    fs = _frames()
    ft = extract(fs)
    assert ft.data.shape == (21, 21, 39)
    assert ft.layout == feature_layout()
    ft38 = extract(fs, include_norm_y=False)
    assert ft38.data.shape == (21, 21, 38)


def test_center_pixel_radial_zero():
    ft = extract(_frames(21, 21))
    assert ft.data[10, 10, 3] == 0.0
    assert ft.data[0, 0, 3] == pytest.approx(math.hypot(10, 10), rel=1e-6)


def test_constant_frames_zero_filter_channels():
    ft = extract(_frames())
    layout = ft.layout
    for i, name in enumerate(layout):
        if name.startswith(("laplacian", "canny", "grad_mag", "grad_x", "grad_y",
                            "grad_xy", "gabor")):
            assert np.allclose(ft.data[:, :, i], 0.0, atol=1e-5), name
    conf = ft.data[:, :, layout.index("confidence")]
    assert np.all(conf == 1.0)


def test_extract_deterministic():
    sc = CornerScene(kind=SceneKind.TWO_PLANE, alpha=math.pi / 2,
                     theta=math.pi / 4, phi=math.pi / 2, gamma=0.0,
                     camera_distance=3.0,
                     materials=(builtin_materials()[0][1],) * 2,
                     resolution=(32, 32), seed=5)
    fs = render(sc, ToFConfig(bounce_samples=16))
    a = extract(fs)
    b = extract(fs)
    assert np.array_equal(a.data, b.data)
    assert a.layout == b.layout


def test_extract_rejects_mismatched_rasters():
    fs = _frames()
    with pytest.raises(DimensionMismatch):
        FrameSet(depth=fs.depth, amplitude=fs.amplitude[:-1],
                 intensity=fs.intensity, ground_truth=fs.ground_truth,
                 valid=fs.valid)


def test_norm_coordinate_channels():
    ft = extract(_frames(10, 20))
    layout = ft.layout
    nx = ft.data[:, :, layout.index("norm_x")]
    ny = ft.data[:, :, layout.index("norm_y")]
    assert nx[0, 0] == 0.0
    assert nx[0, -1] == pytest.approx(19 / 20)
    assert ny[-1, 0] == pytest.approx(9 / 10)


def test_tensor_save_load_round_trip(tmp_path):
    ft = extract(_frames(12, 12))
    path = tmp_path / "feat.tfim"
    ft.save(path)
    assert (tmp_path / "feat.json").exists()
    back = FeatureTensor.load(path)
    assert back.layout == ft.layout
    assert np.array_equal(back.data, ft.data)
