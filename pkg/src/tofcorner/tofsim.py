"""Analytic continuous-wave time-of-flight renderer for corner scenes.

Each pixel's measurement is decoded from a coherent sum of return phasors

    z = sum_k a_k * exp(i * 4 pi f_m * d_k / c)

where d_k is the one-way path distance of return k.  The direct return has
amplitude L * f_r * cos(theta_i) / r^2 at distance r; with multipath enabled
every pixel additionally receives one-bounce returns source -> q -> p ->
camera for stratified sample points q on the other plane(s), at distance
(|C - q| + |q - p| + |p - C|) / 2 with amplitude

    L * f_r(q) * f_r(p) * cos_q_in * cos_q_out * cos_p_in
      / (r_q^2 * r_qp^2) * dA_q .

Decoded depth is arg(z) * c / (4 pi f_m) wrapped into the unambiguous range,
amplitude is |z|, and intensity is the incoherent (DC) sum of the return
amplitudes.  Pixels whose primary ray misses every plane, or that receive no
energy at all (e.g. back-face hits), are flagged invalid.

The illumination source is a point co-located with the camera with constant
radiant intensity L = 1.  Only one bounce is simulated; higher-order paths
are deliberately omitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .brdf import ward_reflectance
from .errors import DimensionMismatch, ZeroSignal
from .scene import CornerScene, Plane, SceneGeometry, scene_geometry

SPEED_OF_LIGHT = 299_792_458.0
SOURCE_INTENSITY = 1.0

# Clamp on the bounce-segment length; kills form-factor fireflies when a
# sample point lands next to the shaded point near the corner spine.
_MIN_BOUNCE_DISTANCE = 1e-2

_RAY_EPS = 1e-9


@dataclass(frozen=True)
class ToFConfig:
    modulation_frequency: float = 2.0e7
    bounce_samples: int = 64
    multipath_enabled: bool = True
    noise_stddev: float = 0.0

    def __post_init__(self):
        if self.modulation_frequency <= 0.0:
            raise ValueError("modulation_frequency must be positive")
        if self.bounce_samples < 1:
            raise ValueError("bounce_samples must be >= 1")

    @property
    def unambiguous_range(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.modulation_frequency)


@dataclass
class FrameSet:
    """Co-registered rasters: measured depth, amplitude, intensity, and
    ground-truth depth, plus a validity mask."""

    depth: np.ndarray
    amplitude: np.ndarray
    intensity: np.ndarray
    ground_truth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        shape = self.depth.shape
        for name in ("amplitude", "intensity", "ground_truth", "valid"):
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(f"{name} raster shape differs from depth")

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def save(self, path) -> None:
        """Write <path> as a 4-channel TFIM raster plus a .tfmk mask sidecar."""
        path = Path(path)
        stack = np.stack(
            [self.depth, self.amplitude, self.intensity, self.ground_truth], axis=-1
        )
        formats.write_raster(path, stack)
        formats.write_mask(path.with_suffix(".tfmk"), self.valid)

    @classmethod
    def load(cls, path) -> "FrameSet":
        path = Path(path)
        stack = formats.read_raster(path).astype(np.float64)
        if stack.shape[2] != 4:
            raise DimensionMismatch(f"{path}: expected 4 channels, got {stack.shape[2]}")
        mask = formats.read_mask(path.with_suffix(".tfmk"))
        if mask.shape != stack.shape[:2]:
            raise DimensionMismatch(f"{path}: mask dimensions disagree with raster")
        return cls(
            depth=stack[:, :, 0],
            amplitude=stack[:, :, 1],
            intensity=stack[:, :, 2],
            ground_truth=stack[:, :, 3],
            valid=mask,
        )


# ---------------------------------------------------------------------------
# phasor decoding


def _decode_phasor(z: np.ndarray, cfg: ToFConfig):
    phase = np.mod(np.angle(z), 2.0 * np.pi)
    depth = phase * SPEED_OF_LIGHT / (4.0 * np.pi * cfg.modulation_frequency)
    return np.mod(depth, cfg.unambiguous_range), np.abs(z)


def combine_phasors(returns, cfg: ToFConfig) -> tuple[float, float]:
    """Coherently combine (amplitude, path_distance) returns.

    Returns (depth, amplitude); raises ZeroSignal when every amplitude is 0.
    """
    amps = np.asarray([a for a, _ in returns], dtype=np.float64)
    dists = np.asarray([d for _, d in returns], dtype=np.float64)
    if amps.size == 0 or not np.any(amps > 0.0):
        raise ZeroSignal("all return amplitudes are zero")
    if np.any(amps < 0.0):
        raise ValueError("return amplitudes must be non-negative")
    k = 4.0 * np.pi * cfg.modulation_frequency / SPEED_OF_LIGHT
    z = np.sum(amps * np.exp(1j * k * dists))
    depth, amplitude = _decode_phasor(z, cfg)
    return float(depth), float(amplitude)


# ---------------------------------------------------------------------------
# ray casting


def _pixel_directions(scene: CornerScene, geo: SceneGeometry) -> np.ndarray:
    w, h = scene.resolution
    tan_half = math.tan(scene.fov / 2.0)
    xs = (2.0 * (np.arange(w) + 0.5) / w - 1.0) * tan_half
    ys = (1.0 - 2.0 * (np.arange(h) + 0.5) / h) * tan_half * (h / w)
    dirs = (
        xs[None, :, None] * geo.right[None, None, :]
        + ys[:, None, None] * geo.up[None, None, :]
        + geo.view[None, None, :]
    )
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def _in_plane(plane: Plane, pts: np.ndarray, geo: SceneGeometry) -> np.ndarray:
    """Membership test for points already lying on the plane's surface."""
    if plane.is_floor:
        n_a, n_b = geo.wall_normals
        r = np.linalg.norm(pts, axis=-1)
        return (pts @ n_a >= 0.0) & (pts @ n_b >= 0.0) & (r <= plane.extent)
    u = pts @ plane.u_dir
    v = pts @ plane.v_dir
    return (u >= 0.0) & (u <= plane.extent) & (np.abs(v) <= plane.extent)


def _intersect(geo: SceneGeometry, origin: np.ndarray, dirs: np.ndarray):
    """Nearest plane hit for each ray; returns (t, plane_index).

    Rays that miss every plane get t = inf and index -1.
    """
    shape = dirs.shape[:-1]
    best_t = np.full(shape, np.inf)
    best_idx = np.full(shape, -1, dtype=np.int8)
    for i, plane in enumerate(geo.planes):
        denom = dirs @ plane.normal
        num = -float(origin @ plane.normal)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(denom) > 1e-12, num / denom, np.inf)
        pts = origin[None, :] + t[..., None] * dirs
        hit = (t > _RAY_EPS) & np.isfinite(t) & _in_plane(plane, pts, geo)
        closer = hit & (t < best_t)
        best_t[closer] = t[closer]
        best_idx[closer] = i
    return best_t, best_idx


def _segment_blocked(geo: SceneGeometry, origin: np.ndarray, targets: np.ndarray,
                     skip_index: int) -> np.ndarray:
    """True where the open segment origin->target crosses some other plane."""
    blocked = np.zeros(targets.shape[0], dtype=bool)
    seg = targets - origin[None, :]
    for i, plane in enumerate(geo.planes):
        if i == skip_index:
            continue
        denom = seg @ plane.normal
        num = -float(origin @ plane.normal)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(denom) > 1e-15, num / denom, np.inf)
        inside = (t > 1e-9) & (t < 1.0 - 1e-9)
        pts = origin[None, :] + t[:, None] * seg
        blocked |= inside & _in_plane(plane, pts, geo)
    return blocked


# ---------------------------------------------------------------------------
# bounce sampling


def _grid_dims(count: int) -> tuple[int, int]:
    g = int(math.isqrt(count))
    while count % g:
        g -= 1
    return g, count // g


def _sample_plane_points(plane: Plane, geo: SceneGeometry, count: int,
                         rng: np.random.Generator):
    """Stratified-jittered sample points on a plane; returns (points, dA)."""
    gu, gv = _grid_dims(count)
    iu, iv = np.meshgrid(np.arange(gu), np.arange(gv), indexing="ij")
    ju = rng.random((gu, gv))
    jv = rng.random((gu, gv))
    u01 = ((iu + ju) / gu).ravel()
    v01 = ((iv + jv) / gv).ravel()
    if plane.is_floor:
        psi0 = math.pi / 2.0 - geo.alpha
        psi = psi0 + u01 * geo.alpha
        r = plane.extent * np.sqrt(v01)
        pts = np.stack([r * np.cos(psi), r * np.sin(psi), np.zeros_like(r)], axis=-1)
        area = 0.5 * geo.alpha * plane.extent**2
    else:
        u = u01 * plane.extent
        v = (2.0 * v01 - 1.0) * plane.extent
        pts = u[:, None] * plane.u_dir[None, :] + v[:, None] * plane.v_dir[None, :]
        area = 2.0 * plane.extent**2
    return pts, area / count


# ---------------------------------------------------------------------------
# rendering


def render(scene: CornerScene, cfg: ToFConfig = ToFConfig()) -> FrameSet:
    """Render one scene into a FrameSet (float64 rasters)."""
    geo = scene_geometry(scene)
    w, h = scene.resolution
    cam = geo.camera_origin
    dirs = _pixel_directions(scene, geo)

    t_hit, idx_hit = _intersect(geo, cam, dirs)
    hit = idx_hit >= 0
    r_pix = np.where(hit, t_hit, 0.0)
    points = cam[None, None, :] + r_pix[..., None] * dirs

    ground_truth = r_pix.copy()

    k_phase = 4.0 * np.pi * cfg.modulation_frequency / SPEED_OF_LIGHT
    z = np.zeros((h, w), dtype=np.complex128)
    dc = np.zeros((h, w), dtype=np.float64)

    # Direct return: retro-reflection of the co-located source.
    for i, plane in enumerate(geo.planes):
        on = hit & (idx_hit == i)
        if not np.any(on):
            continue
        cos_i = np.where(on, -(dirs @ plane.normal), 0.0)
        cos_i = np.maximum(cos_i, 0.0)
        f_r = ward_reflectance(plane.material, plane.normal, -dirs, -dirs)
        with np.errstate(divide="ignore", invalid="ignore"):
            a0 = np.where(
                on & (r_pix > 0.0),
                SOURCE_INTENSITY * f_r * cos_i / np.maximum(r_pix, 1e-300) ** 2,
                0.0,
            )
        z += a0 * np.exp(1j * k_phase * r_pix)
        dc += a0

    if cfg.multipath_enabled:
        _add_bounce_returns(scene, cfg, geo, dirs, r_pix, points, idx_hit, z, dc)

    depth, amplitude = _decode_phasor(z, cfg)
    valid = hit & (dc > 0.0)
    depth = np.where(valid, depth, 0.0)
    amplitude = np.where(valid, amplitude, 0.0)
    intensity = np.where(valid, dc, 0.0)

    if cfg.noise_stddev > 0.0:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([scene.seed, 0x6E015E])))
        noise = rng.normal(0.0, cfg.noise_stddev, size=depth.shape)
        depth = np.where(valid, np.mod(depth + noise, cfg.unambiguous_range), 0.0)

    return FrameSet(
        depth=depth,
        amplitude=amplitude,
        intensity=intensity,
        ground_truth=ground_truth,
        valid=valid,
    )


def _add_bounce_returns(scene, cfg, geo, dirs, r_pix, points, idx_hit, z, dc):
    h, w = r_pix.shape
    cam = geo.camera_origin
    k_phase = 4.0 * np.pi * cfg.modulation_frequency / SPEED_OF_LIGHT
    n_planes = len(geo.planes)
    per_plane = cfg.bounce_samples if n_planes == 2 else (cfg.bounce_samples + 1) // 2
    occlusion_possible = not geo.camera_inside_wedge()

    samples = []
    for j, plane in enumerate(geo.planes):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([scene.seed, j])))
        q, da = _sample_plane_points(plane, geo, per_plane, rng)
        to_cam = cam[None, :] - q
        r_q = np.sqrt(np.sum(to_cam * to_cam, axis=-1))
        dir_q_cam = to_cam / r_q[:, None]
        cos_q_in = np.maximum(dir_q_cam @ plane.normal, 0.0)
        lit = cos_q_in > 0.0
        if occlusion_possible:
            lit &= ~_segment_blocked(geo, cam, q, j)
        # Source-side prefactor; the area weight folds the MC estimate in.
        pref = SOURCE_INTENSITY * cos_q_in * lit / r_q**2 * da
        samples.append((q, dir_q_cam, r_q, pref))

    flat_dirs = dirs.reshape(-1, 3)
    flat_pts = points.reshape(-1, 3)
    flat_r = r_pix.reshape(-1)
    flat_idx = idx_hit.reshape(-1)
    flat_z = z.reshape(-1)
    flat_dc = dc.reshape(-1)

    # (pixels x samples) tiles sized to stay cache-resident
    chunk_px = max(per_plane, 250_000 // per_plane)
    for tgt, tgt_plane in enumerate(geo.planes):
        sel_all = np.flatnonzero(flat_idx == tgt)
        if sel_all.size == 0:
            continue
        for c0 in range(0, sel_all.size, chunk_px):
            sel = sel_all[c0 : c0 + chunk_px]
            pts_t = flat_pts[sel]
            wo_cam = -flat_dirs[sel][:, None, :]  # direction p -> camera
            r_t = flat_r[sel]
            for src, src_plane in enumerate(geo.planes):
                if src == tgt:
                    continue
                q, dir_q_cam, r_q, pref = samples[src]
                if not np.any(pref > 0.0):
                    continue
                v = q[None, :, :] - pts_t[:, None, :]  # (S, K, 3)
                r_qp = np.maximum(
                    np.sqrt(np.sum(v * v, axis=-1)), _MIN_BOUNCE_DISTANCE
                )
                wi_p = v / r_qp[..., None]  # at p, pointing toward q
                cos_p_in = np.maximum(wi_p @ tgt_plane.normal, 0.0)
                cos_q_out = np.maximum(-(wi_p @ src_plane.normal), 0.0)
                f_q = ward_reflectance(src_plane.material, src_plane.normal,
                                       dir_q_cam[None, :, :], -wi_p)
                f_p = ward_reflectance(tgt_plane.material, tgt_plane.normal,
                                       wi_p, wo_cam)
                amp = pref[None, :] * f_q * f_p * cos_q_out * cos_p_in / r_qp**2
                d_k = 0.5 * (r_q[None, :] + r_qp + r_t[:, None])
                phase = k_phase * d_k
                flat_z[sel] += np.sum(amp * np.cos(phase), axis=1) \
                    + 1j * np.sum(amp * np.sin(phase), axis=1)
                flat_dc[sel] += np.sum(amp, axis=1)
