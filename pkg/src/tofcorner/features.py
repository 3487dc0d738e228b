"""Per-pixel feature extraction: a 39-channel tensor per frame.

Canonical channel order (frozen, version 1):

   0  intensity                 raw pixel values
   1  depth
   2  amplitude
   3  radial_distance           pixels from the image centre
   4  confidence                gaussian confidence measure (see below)
   5- 7  laplacian{3,5,7}_intensity
   8-10  laplacian{3,5,7}_depth
  11-13  canny{3,5,7}_intensity
  14-16  canny{3,5,7}_depth
  17-20  gabor{0,45,90,135}_intensity
  21-24  gabor{0,45,90,135}_depth
  25-29  grad_{x,y,xy,mag,angle}_intensity
  30-34  grad_{x,y,xy,mag,angle}_depth
  35  lbp_intensity
  36  lbp_depth
  37  norm_x                    x / W
  38  norm_y                    y / H  (dropped in 38-feature mode)

The default confidence is the literal form

    C = exp(-(D cos(-pi/4) + D sin(-pi/4))^2)

whose inner sum cancels, so the channel is identically 1.0; it is kept
as-is and doubles as a negative control for feature importance.  The
"amplitude_depth" mode replaces the first D with the amplitude raster,
which yields a non-degenerate mixture; it is not the default.

No whole-image statistics (mean/median of a channel) are used anywhere:
such features would tie the model to one scene scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import filters, formats
from .errors import DimensionMismatch
from .tofsim import FrameSet

LAYOUT_VERSION = 1

CONFIDENCE_LITERAL = "literal"
CONFIDENCE_AMPLITUDE_DEPTH = "amplitude_depth"


def feature_layout(include_norm_y: bool = True) -> list[str]:
    names = ["intensity", "depth", "amplitude", "radial_distance", "confidence"]
    for src in ("intensity", "depth"):
        names += [f"laplacian{k}_{src}" for k in (3, 5, 7)]
    for src in ("intensity", "depth"):
        names += [f"canny{k}_{src}" for k in (3, 5, 7)]
    for src in ("intensity", "depth"):
        names += [f"gabor{a}_{src}" for a in filters.GABOR_ORIENTATIONS]
    for src in ("intensity", "depth"):
        names += [f"grad_{part}_{src}" for part in ("x", "y", "xy", "mag", "angle")]
    names += ["lbp_intensity", "lbp_depth", "norm_x"]
    if include_norm_y:
        names.append("norm_y")
    return names


def confidence(depth_value, mode: str = CONFIDENCE_LITERAL, amplitude=None):
    """Gaussian confidence of a depth measurement.

    The literal form evaluates exp(-(D cos(-pi/4) + D sin(-pi/4))^2); the
    cosine and sine cancel, so the result is 1.0 for every finite depth.
    """
    d = np.asarray(depth_value, dtype=np.float64)
    if mode == CONFIDENCE_LITERAL:
        inner = d * np.cos(-np.pi / 4.0) + d * np.sin(-np.pi / 4.0)
    elif mode == CONFIDENCE_AMPLITUDE_DEPTH:
        if amplitude is None:
            raise ValueError("amplitude_depth confidence needs the amplitude raster")
        a = np.asarray(amplitude, dtype=np.float64)
        inner = a * np.cos(-np.pi / 4.0) + d * np.sin(-np.pi / 4.0)
    else:
        raise ValueError(f"unknown confidence mode {mode!r}")
    out = np.exp(-(inner**2))
    return float(out) if out.ndim == 0 else out


@dataclass
class FeatureTensor:
    data: np.ndarray  # (H, W, F) float32
    layout: list[str]

    def __post_init__(self):
        if self.data.shape[-1] != len(self.layout):
            raise DimensionMismatch(
                f"{self.data.shape[-1]} channels vs {len(self.layout)} layout names"
            )

    @property
    def shape(self):
        return self.data.shape

    def save(self, path) -> None:
        path = Path(path)
        formats.write_raster(path, self.data)
        sidecar = {"layout_version": LAYOUT_VERSION, "layout": self.layout}
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureTensor":
        path = Path(path)
        data = formats.read_raster(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        return cls(data=data, layout=list(sidecar["layout"]))


def extract(
    frames: FrameSet,
    include_norm_y: bool = True,
    confidence_mode: str = CONFIDENCE_LITERAL,
) -> FeatureTensor:
    """Assemble the per-pixel feature tensor for one frame set."""
    h, w = frames.shape
    intensity = frames.intensity
    depth = frames.depth

    cols, rows = np.meshgrid(np.arange(w, dtype=np.float64),
                             np.arange(h, dtype=np.float64))
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    radial = np.hypot(cols - cx, rows - cy)

    channels = [
        intensity,
        depth,
        frames.amplitude,
        radial,
        confidence(depth, mode=confidence_mode, amplitude=frames.amplitude),
    ]
    for src in (intensity, depth):
        channels += [filters.laplacian(src, k) for k in (3, 5, 7)]
    for src in (intensity, depth):
        channels += [filters.canny(src, k) for k in (3, 5, 7)]
    for src in (intensity, depth):
        channels += list(filters.gabor_bank(src))
    for src in (intensity, depth):
        channels += list(filters.gradients(src))
    channels += [filters.lbp(intensity), filters.lbp(depth)]
    channels.append(cols / w)
    if include_norm_y:
        channels.append(rows / h)

    data = np.stack(channels, axis=-1).astype(np.float32)
    return FeatureTensor(data=data, layout=feature_layout(include_norm_y))
