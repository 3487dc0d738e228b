"""Single-channel filter bank: Laplacian, Canny, Gabor, gradients, LBP.

All kernels use the cross-correlation convention (no kernel flip) and
replicate the image edge outside the border.  Kernel coefficients are pinned
here so the downstream feature vectors are reproducible:

  * Laplacian 3x3 is the 5-point stencil [[0,1,0],[1,-4,1],[0,1,0]];
    apertures 5 and 7 use the Sobel-composed construction
    outer(smooth, d2) + outer(d2, smooth) with binomial smoothing rows.
  * Sobel first derivatives are outer(smooth, d1) with d1 = [-1, 0, 1]
    widened by binomial convolution.
  * Gabor kernels are 13x13, wavelength 8 px, gaussian sigma 4 px, aspect
    0.5, phase 0, at orientations 0/45/90/135 degrees, mean-subtracted so a
    constant image maps to zero.
  * Canny uses per-image 70th/90th percentile thresholds on the non-maximum
    suppressed gradient magnitude, then 8-connected hysteresis.
  * LBP compares the 8 radius-1 neighbours (>= sets the bit) ordered
    clockwise from the east neighbour, bit 0 = east.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .errors import BadKernelSize

GABOR_SIZE = 13
GABOR_WAVELENGTH = 8.0
GABOR_SIGMA = 4.0
GABOR_ASPECT = 0.5
GABOR_ORIENTATIONS = (0, 45, 90, 135)


def _conv(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.correlate(np.asarray(img, dtype=np.float64), kernel, mode="nearest")


def _binomial(n: int) -> np.ndarray:
    row = np.array([1.0])
    for _ in range(n):
        row = np.convolve(row, [1.0, 1.0])
    return row


def deriv_kernel_1d(order: int, size: int) -> np.ndarray:
    """1-D derivative kernel of the given aperture (binomial-widened)."""
    if size not in (3, 5, 7) or size < order + 1:
        raise BadKernelSize(f"aperture {size} unsupported")
    base = np.array([-1.0, 0.0, 1.0]) if order == 1 else np.array([1.0, -2.0, 1.0])
    return np.convolve(base, _binomial(size - 3))


def sobel_kernel(axis: int, size: int = 3) -> np.ndarray:
    """2-D Sobel kernel; axis 0 differentiates along rows (y), 1 along columns (x)."""
    d = deriv_kernel_1d(1, size)
    s = _binomial(size - 1)
    return np.outer(d, s) if axis == 0 else np.outer(s, d)


def laplacian_kernel(size: int) -> np.ndarray:
    if size == 3:
        return np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
    if size in (5, 7):
        d2 = deriv_kernel_1d(2, size)
        s = _binomial(size - 1)
        return np.outer(s, d2) + np.outer(d2, s)
    raise BadKernelSize(f"laplacian aperture must be 3, 5 or 7, got {size}")


def laplacian(img: np.ndarray, kernel_size: int) -> np.ndarray:
    return _conv(img, laplacian_kernel(kernel_size))


def gabor_kernel(orientation_deg: float) -> np.ndarray:
    half = GABOR_SIZE // 2
    ys, xs = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    t = math.radians(orientation_deg)
    xp = xs * math.cos(t) + ys * math.sin(t)
    yp = -xs * math.sin(t) + ys * math.cos(t)
    g = np.exp(-(xp**2 + (GABOR_ASPECT * yp) ** 2) / (2.0 * GABOR_SIGMA**2))
    g *= np.cos(2.0 * np.pi * xp / GABOR_WAVELENGTH)
    return g - g.mean()


def gabor_bank(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Responses at 0, 45, 90 and 135 degrees."""
    return tuple(_conv(img, gabor_kernel(a)) for a in GABOR_ORIENTATIONS)


def gradients(img: np.ndarray):
    """Sobel-3 gradients: (grad_x, grad_y, grad_xy, magnitude, angle).

    grad_xy is the cross derivative (Sobel-x then Sobel-y applied
    sequentially); angle is atan2(gy, gx) with atan2(0, 0) = 0.
    """
    gx = _conv(img, sobel_kernel(1))
    gy = _conv(img, sobel_kernel(0))
    gxy = _conv(gx, sobel_kernel(0))
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)
    return gx, gy, gxy, mag, ang


def canny(img: np.ndarray, aperture: int) -> np.ndarray:
    """Classic Canny chain with scale-free percentile thresholds; output in {0, 1}."""
    if aperture not in (3, 5, 7):
        raise BadKernelSize(f"canny aperture must be 3, 5 or 7, got {aperture}")
    gx = _conv(img, sobel_kernel(1, aperture))
    gy = _conv(img, sobel_kernel(0, aperture))
    mag = np.hypot(gx, gy)

    # Quantise the gradient direction to 4 sectors and suppress non-maxima.
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor((ang + np.pi / 8.0) / (np.pi / 4.0)).astype(int) % 4
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    padded = np.pad(mag, 1, mode="edge")
    rr, cc = np.mgrid[0 : mag.shape[0], 0 : mag.shape[1]]
    fwd = np.zeros_like(mag)
    bwd = np.zeros_like(mag)
    for s, (dr, dc) in offsets.items():
        sel = sector == s
        fwd[sel] = padded[rr[sel] + 1 + dr, cc[sel] + 1 + dc]
        bwd[sel] = padded[rr[sel] + 1 - dr, cc[sel] + 1 - dc]
    nms = np.where((mag > fwd) & (mag >= bwd), mag, 0.0)

    lo, hi = np.percentile(mag, (70.0, 90.0))
    strong = nms > hi
    weak = nms > lo
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return np.zeros_like(mag)
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels].astype(np.float64)


_LBP_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))


def lbp(img: np.ndarray) -> np.ndarray:
    """8-neighbour radius-1 local binary pattern codes in [0, 255]."""
    a = np.asarray(img, dtype=np.float64)
    padded = np.pad(a, 1, mode="edge")
    h, w = a.shape
    code = np.zeros((h, w), dtype=np.float64)
    for bit, (dr, dc) in enumerate(_LBP_OFFSETS):
        neigh = padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
        code += (neigh >= a) * float(1 << bit)
    return code
