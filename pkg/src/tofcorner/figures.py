"""Report figures rendered alongside the JSON/CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport
from .tofsim import FrameSet


def plot_rpe_histogram(report: EvalReport, path) -> None:
    """Before/after relative-error distributions as step histograms."""
    lo, hi = report.histogram_range
    edges = np.linspace(lo, hi, report.histogram_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.step(centers, report.histogram_before, where="mid",
            label=f"before (mean {report.mean_rpe_before:.3f})", color="tab:red")
    ax.step(centers, report.histogram_after, where="mid",
            label=f"after (mean {report.mean_rpe_after:.3f})", color="tab:green")
    ax.set_xlabel("relative per-pixel error")
    ax.set_ylabel("pixel count")
    ax.set_title(f"error distribution over {report.n_pixels} test pixels")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_importances(report: EvalReport, path, top: int = 15) -> None:
    if not report.importances_top:
        return
    pairs = report.importances_top[:top]
    names = [p[0] for p in pairs][::-1]
    vals = [p[1] for p in pairs][::-1]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.5))
    ax.barh(names, vals, color="tab:blue")
    ax.set_xlabel("feature importance (mean decrease in impurity)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_depth_panels(frames: FrameSet, corrected: np.ndarray, path) -> None:
    """Measured / corrected / ground-truth depth maps for one scene."""
    rasters = [
        ("measured", frames.depth),
        ("corrected", corrected),
        ("ground truth", frames.ground_truth),
    ]
    vmax = float(frames.ground_truth.max()) or 1.0
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, (title, img) in zip(axes, rasters):
        im = ax.imshow(np.where(frames.valid, img, np.nan), cmap="gray",
                       vmin=0.0, vmax=vmax)
        ax.set_title(title)
        ax.set_axis_off()
    fig.colorbar(im, ax=axes, shrink=0.8, label="depth [m]")
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_report_figures(report: EvalReport, out_dir, sample=None) -> list[Path]:
    """Write the standard figure set; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out_dir / "rpe_histogram.png"
    plot_rpe_histogram(report, p)
    paths.append(p)
    if report.importances_top:
        p = out_dir / "feature_importances.png"
        plot_importances(report, p)
        paths.append(p)
    if sample is not None:
        frames, corrected = sample
        p = out_dir / "depth_panels.png"
        plot_depth_panels(frames, corrected, p)
        paths.append(p)
    return paths
