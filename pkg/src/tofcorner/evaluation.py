"""Relative per-pixel error statistics over frame sets.

The error of a measurement d against ground truth d_gt is

    RPE = |d_gt - d| / |d_gt|

computed per valid pixel.  evaluate() aggregates mean, population variance,
fixed-bin histograms (values above 1 are clipped into the top bin for the
histogram only, never for the moments), and per-scene statistics for the
uncorrected and corrected depth rasters.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, DivisionByZeroGroundTruth

HISTOGRAM_BINS = 100


def rpe(d_gt: float, d: float) -> float:
    """Relative per-pixel error of one measurement."""
    if d_gt == 0.0:
        raise DivisionByZeroGroundTruth("zero ground truth reached rpe(); mask bug")
    return abs(d_gt - d) / abs(d_gt)


def _rpe_array(d_gt: np.ndarray, d: np.ndarray) -> np.ndarray:
    return np.abs(d_gt - d) / np.abs(d_gt)


@dataclass
class EvalReport:
    mean_rpe_before: float
    mean_rpe_after: float
    var_rpe_before: float
    var_rpe_after: float
    histogram_before: list[int]
    histogram_after: list[int]
    n_pixels: int
    per_scene: list[dict]
    importances_top: list = field(default_factory=list)
    histogram_bins: int = HISTOGRAM_BINS
    histogram_range: tuple[float, float] = (0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "n_pixels": self.n_pixels,
            "mean_rpe_before": self.mean_rpe_before,
            "mean_rpe_after": self.mean_rpe_after,
            "var_rpe_before": self.var_rpe_before,
            "var_rpe_after": self.var_rpe_after,
            "histogram": {
                "bins": self.histogram_bins,
                "range": list(self.histogram_range),
                "before": self.histogram_before,
                "after": self.histogram_after,
            },
            "per_scene": self.per_scene,
            "importances_top": [[n, v] for n, v in self.importances_top],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            mean_rpe_before=d["mean_rpe_before"],
            mean_rpe_after=d["mean_rpe_after"],
            var_rpe_before=d["var_rpe_before"],
            var_rpe_after=d["var_rpe_after"],
            histogram_before=list(d["histogram"]["before"]),
            histogram_after=list(d["histogram"]["after"]),
            n_pixels=d["n_pixels"],
            per_scene=list(d["per_scene"]),
            importances_top=[(n, v) for n, v in d["importances_top"]],
            histogram_bins=d["histogram"]["bins"],
            histogram_range=tuple(d["histogram"]["range"]),
        )


def _histogram(values: np.ndarray) -> np.ndarray:
    clipped = np.minimum(values, 1.0)
    counts, _ = np.histogram(clipped, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return counts


def evaluate(frames, corrected, importances_top=None, scene_names=None) -> EvalReport:
    """Aggregate before/after error statistics over aligned scene lists.

    `corrected` holds one corrected depth raster per frame set.  Pixels with
    zero ground truth or an unset validity flag contribute to nothing.
    """
    if len(frames) != len(corrected):
        raise DimensionMismatch(
            f"{len(frames)} frame sets vs {len(corrected)} corrected rasters"
        )
    before_parts, after_parts, per_scene = [], [], []
    for i, (fs, dc) in enumerate(zip(frames, corrected)):
        dc = np.asarray(dc, dtype=np.float64)
        if dc.shape != fs.shape:
            raise DimensionMismatch(
                f"scene {i}: corrected raster {dc.shape} vs frames {fs.shape}"
            )
        mask = fs.valid & (fs.ground_truth > 0.0)
        gt = fs.ground_truth[mask]
        b = _rpe_array(gt, fs.depth[mask])
        a = _rpe_array(gt, dc[mask])
        before_parts.append(b)
        after_parts.append(a)
        name = scene_names[i] if scene_names else f"scene_{i:06d}"
        per_scene.append(
            {
                "scene": name,
                "n_pixels": int(mask.sum()),
                "mean_before": float(b.mean()) if b.size else 0.0,
                "var_before": float(b.var()) if b.size else 0.0,
                "mean_after": float(a.mean()) if a.size else 0.0,
                "var_after": float(a.var()) if a.size else 0.0,
            }
        )
    before = np.concatenate(before_parts) if before_parts else np.zeros(0)
    after = np.concatenate(after_parts) if after_parts else np.zeros(0)
    if before.size == 0:
        raise DimensionMismatch("no valid pixels to evaluate")

    return EvalReport(
        mean_rpe_before=float(before.mean()),
        mean_rpe_after=float(after.mean()),
        var_rpe_before=float(before.var()),
        var_rpe_after=float(after.var()),
        histogram_before=_histogram(before).tolist(),
        histogram_after=_histogram(after).tolist(),
        n_pixels=int(before.size),
        per_scene=per_scene,
        importances_top=list(importances_top or []),
    )


def write_report_json(report: EvalReport, path) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")


def write_histogram_csv(report: EvalReport, path) -> None:
    lo, hi = report.histogram_range
    edges = np.linspace(lo, hi, report.histogram_bins + 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count_before", "count_after"])
        for i in range(report.histogram_bins):
            writer.writerow(
                [
                    f"{edges[i]:.6f}",
                    f"{edges[i + 1]:.6f}",
                    report.histogram_before[i],
                    report.histogram_after[i],
                ]
            )
