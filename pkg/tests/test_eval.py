import json

import numpy as np
import pytest

from tofcorner.errors import DimensionMismatch, DivisionByZeroGroundTruth
from tofcorner.evaluation import (
    EvalReport,
    evaluate,
    rpe,
    write_histogram_csv,
    write_report_json,
)
from tofcorner.tofsim import FrameSet


def _frames(gt, depth, valid=None):
    gt = np.asarray(gt, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.ones_like(gt, bool) if valid is None else valid
    zero = np.zeros_like(gt)
    return FrameSet(depth=depth, amplitude=zero, intensity=zero,
                    ground_truth=gt, valid=valid)


def test_rpe_examples():
    assert rpe(2.0, 2.0) == 0.0
    assert rpe(2.0, 2.2) == pytest.approx(0.1, abs=1e-12)
    assert rpe(3.0, 0.0) == 1.0


def test_rpe_zero_ground_truth_raises():
    with pytest.raises(DivisionByZeroGroundTruth):
        rpe(0.0, 1.0)


def test_perfect_correction():
    rng = np.random.default_rng(0)
    gt = rng.uniform(1.0, 4.0, size=(16, 16))
    fs = _frames(gt, gt * 1.1)
    report = evaluate([fs], [gt.copy()])
    assert report.mean_rpe_after == 0.0
    assert report.var_rpe_after == 0.0
    assert report.mean_rpe_before == pytest.approx(0.1, rel=1e-9)


def test_identity_correction_before_equals_after():
    rng = np.random.default_rng(1)
    gt = rng.uniform(1.0, 4.0, size=(8, 8))
    depth = gt + rng.normal(0, 0.2, size=(8, 8))
    fs = _frames(gt, depth)
    report = evaluate([fs], [depth.copy()])
    assert report.mean_rpe_after == report.mean_rpe_before
    assert report.var_rpe_after == report.var_rpe_before
    assert report.histogram_after == report.histogram_before


def test_masked_pixels_excluded():
    gt = np.array([[2.0, 0.0], [2.0, 2.0]])
    depth = np.array([[2.2, 9.9], [2.2, 2.2]])
    valid = np.array([[True, True], [True, False]])
    report = evaluate([_frames(gt, depth, valid)], [depth.copy()])
    assert report.n_pixels == 2  # the gt==0 and the invalid pixel drop out
    assert report.mean_rpe_before == pytest.approx(0.1, rel=1e-9)


def test_histogram_counts_sum_and_top_bin_clipping():
    gt = np.full((10, 10), 1.0)
    depth = np.linspace(0.0, 3.0, 100).reshape(10, 10)  # rpe up to 2.0
    report = evaluate([_frames(gt, depth)], [gt.copy()])
    assert sum(report.histogram_before) == report.n_pixels == 100
    assert report.histogram_before[-1] >= np.sum(np.abs(depth - 1.0) >= 0.99)
    # moments are computed on unclipped values
    assert report.mean_rpe_before > np.mean(np.clip(np.abs(depth - 1.0), 0, 1)) - 1e-9


def test_permutation_invariance():
    rng = np.random.default_rng(2)
    gt = rng.uniform(1.0, 3.0, size=(12, 12))
    depth = gt * (1.0 + rng.normal(0, 0.05, size=(12, 12)))
    f1 = _frames(gt, depth)
    f2 = _frames(gt[::-1].copy(), depth[::-1].copy())
    a = evaluate([f1, f2], [depth.copy(), depth[::-1].copy()])
    b = evaluate([f2, f1], [depth[::-1].copy(), depth.copy()])
    assert a.mean_rpe_before == pytest.approx(b.mean_rpe_before, abs=1e-12)
    assert a.var_rpe_before == pytest.approx(b.var_rpe_before, abs=1e-12)
    assert a.n_pixels == b.n_pixels


def test_population_variance():
    gt = np.full((1, 4), 1.0)
    depth = np.array([[1.1, 1.2, 1.3, 1.4]])
    report = evaluate([_frames(gt, depth)], [depth.copy()])
    vals = np.array([0.1, 0.2, 0.3, 0.4])
    assert report.var_rpe_before == pytest.approx(vals.var(), rel=1e-9)  # ddof=0


def test_dimension_checks():
    gt = np.full((4, 4), 2.0)
    fs = _frames(gt, gt)
    with pytest.raises(DimensionMismatch):
        evaluate([fs], [np.zeros((3, 4))])
    with pytest.raises(DimensionMismatch):
        evaluate([fs, fs], [gt.copy()])


def test_report_json_and_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    gt = rng.uniform(1.0, 3.0, size=(9, 9))
    depth = gt * 1.05
    report = evaluate([_frames(gt, depth)], [gt.copy()],
                      importances_top=[("depth", 0.5), ("lbp_depth", 0.25)])
    jpath = tmp_path / "report.json"
    cpath = tmp_path / "report.csv"
    write_report_json(report, jpath)
    write_histogram_csv(report, cpath)
    loaded = EvalReport.from_dict(json.loads(jpath.read_text()))
    assert loaded.mean_rpe_before == report.mean_rpe_before
    assert loaded.histogram_before == report.histogram_before
    assert loaded.importances_top[0] == ("depth", 0.5)
    lines = cpath.read_text().strip().splitlines()
    assert lines[0] == "bin_lo,bin_hi,count_before,count_after"
    assert len(lines) == 101
