"""End-to-end orchestration: dataset generation, rendering, training,
correction, and evaluation, plus the file naming conventions that tie the
stages together.

Directory layout produced by a full run:

  out/
    scenes/scene_000000.json ...   scene manifests + dataset.json
    frames/scene_000000.tfim/.tfmk rendered frame sets (+ skipped.json)
    model.tforest                  trained forest
    model.split.json               train/test image split
    corrected/scene_000042.tfim    corrected depth rasters (test images)
    report.json, histogram.csv     evaluation output
    figures/*.png                  report figures

Every stage is deterministic given the seeds recorded in the manifests, so
two runs with the same arguments produce byte-identical artifacts
regardless of worker count.
"""

from __future__ import annotations

import json
import logging
import time
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import evaluation, features, figures, formats
from .errors import (
    DegenerateScene,
    InsufficientData,
    InvalidCount,
    LayoutMismatch,
    TofCornerError,
)
from .forest import ForestConfig, RegressionForest, splitmix64, train
from .scene import (
    CornerScene,
    SceneKind,
    load_manifest,
    sample_challenging_scene,
    sample_simple_scene,
    save_manifest,
    scene_geometry,
)
from .tofsim import FrameSet, ToFConfig, _pixel_directions, render

logger = logging.getLogger("tofcorner")

DATASET_KINDS = ("simple", "challenging2", "challenging3")

DESK_PROFILE = {
    "scenes": 60,
    "resolution": (100, 100),
    "trees": 30,
    "max_depth": 12,
    "min_split": 200,
    "train_images": 48,
    "bounce_samples": 64,
}

PAPER_PROFILE = {
    "scenes": 319,
    "resolution": (200, 200),
    "trees": 150,
    "max_depth": 15,
    "min_split": 10_000,
    "train_images": 300,
    "bounce_samples": 64,
}

PROFILES = {"desk": DESK_PROFILE, "paper": PAPER_PROFILE}


def scene_seed(dataset_seed: int, index: int) -> int:
    """Per-scene seed derived from the dataset seed (splitmix64 step)."""
    return splitmix64(dataset_seed + index)


# ---------------------------------------------------------------------------
# generation


def generate_dataset(kind: str, count: int, seed: int, out_dir,
                     resolution=(200, 200)) -> list[Path]:
    """Write `count` scene manifests plus a dataset manifest."""
    if kind not in DATASET_KINDS:
        raise InvalidCount(f"unknown dataset kind {kind!r}")
    if count < 1:
        raise InvalidCount(f"count must be >= 1, got {count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        s = scene_seed(seed, i)
        if kind == "simple":
            scene = sample_simple_scene(s, resolution=resolution)
        elif kind == "challenging2":
            scene = sample_challenging_scene(s, SceneKind.TWO_PLANE, resolution=resolution)
        else:
            scene = sample_challenging_scene(s, SceneKind.THREE_PLANE, resolution=resolution)
        path = out_dir / f"scene_{i:06d}.json"
        save_manifest(path, scene)
        paths.append(path)
    manifest = {
        "dataset": kind,
        "seed": seed,
        "count": count,
        "resolution": list(resolution),
        "scene_format_version": 1,
        "raster_format_version": 1,
    }
    (out_dir / "dataset.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return paths


# ---------------------------------------------------------------------------
# rendering


def _render_one(args) -> tuple[str, str]:
    scene_path, out_dir, cfg_kwargs = args
    cfg = ToFConfig(**cfg_kwargs)
    try:
        scene = load_manifest(scene_path)[0]
        frames = render(scene, cfg)
    except (DegenerateScene, ValueError, KeyError) as exc:
        return (Path(scene_path).stem, f"degenerate: {exc}")
    frames.save(Path(out_dir) / (Path(scene_path).stem + ".tfim"))
    return (Path(scene_path).stem, "")


def render_dataset(scene_dir, out_dir, cfg: ToFConfig = ToFConfig(),
                   n_jobs: int = 1) -> list[Path]:
    """Render every scene manifest in scene_dir; skips degenerate scenes."""
    scene_dir = Path(scene_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifests = sorted(scene_dir.glob("scene_*.json"))
    if not manifests:
        raise InsufficientData(f"no scene manifests under {scene_dir}")
    cfg_kwargs = {
        "modulation_frequency": cfg.modulation_frequency,
        "bounce_samples": cfg.bounce_samples,
        "multipath_enabled": cfg.multipath_enabled,
        "noise_stddev": cfg.noise_stddev,
    }
    jobs = [(str(p), str(out_dir), cfg_kwargs) for p in manifests]
    t0 = time.time()
    if n_jobs > 1:
        with get_context("fork").Pool(n_jobs) as pool:
            results = pool.map(_render_one, jobs)
    else:
        results = [_render_one(j) for j in jobs]
    skipped = {name: why for name, why in results if why}
    if skipped:
        (out_dir / "skipped.json").write_text(json.dumps(skipped, indent=2) + "\n")
        for name, why in skipped.items():
            logger.warning("skipped %s (%s)", name, why)
    logger.info("rendered %d scenes in %.1fs", len(manifests) - len(skipped),
                time.time() - t0)
    return sorted(out_dir.glob("scene_*.tfim"))


# ---------------------------------------------------------------------------
# training data


def frame_rows(frames: FrameSet):
    """Feature rows and residual targets (gt - depth) over valid pixels."""
    tensor = features.extract(frames)
    mask = frames.valid & (frames.ground_truth > 0.0)
    x = tensor.data[mask]
    y = (frames.ground_truth - frames.depth)[mask]
    return x, y.astype(np.float64), tensor.layout


def build_training_matrix(frame_paths, pixel_fraction: float = 1.0, seed: int = 0):
    """Stack feature rows over frames; optional per-image pixel subsample."""
    xs, ys = [], []
    layout = None
    for i, path in enumerate(frame_paths):
        frames = FrameSet.load(path)
        x, y, layout = frame_rows(frames)
        if pixel_fraction < 1.0 and x.shape[0] > 0:
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence([seed, i, 0x5A5A])))
            keep = max(1, int(round(pixel_fraction * x.shape[0])))
            sel = np.sort(rng.choice(x.shape[0], size=keep, replace=False))
            x, y = x[sel], y[sel]
        xs.append(x)
        ys.append(y)
    if not xs:
        raise InsufficientData("no frames provided")
    return np.concatenate(xs, axis=0), np.concatenate(ys), layout


def split_images(names, train_count: int, seed: int):
    """Deterministic disjoint train/test split over sorted frame names."""
    names = sorted(names)
    if len(names) <= train_count:
        raise InsufficientData(
            f"need more than {train_count} frames for a train/test split, "
            f"got {len(names)}"
        )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x517])))
    perm = rng.permutation(len(names))
    train_names = sorted(names[i] for i in perm[:train_count])
    test_names = sorted(names[i] for i in perm[train_count:])
    return train_names, test_names


def train_model(frames_dir, model_out, trees: int = 150, max_depth: int = 15,
                min_split: int = 10_000, train_images: int = 300, seed: int = 0,
                pixel_fraction: float = 1.0, n_jobs: int = 1) -> Path:
    """Train a correction forest; writes the model and a split manifest."""
    frames_dir = Path(frames_dir)
    frame_paths = sorted(frames_dir.glob("scene_*.tfim"))
    names = [p.stem for p in frame_paths]
    train_names, test_names = split_images(names, train_images, seed)

    t0 = time.time()
    x, y, layout = build_training_matrix(
        [frames_dir / f"{n}.tfim" for n in train_names],
        pixel_fraction=pixel_fraction, seed=seed,
    )
    logger.info("assembled %d rows x %d features in %.1fs",
                x.shape[0], x.shape[1], time.time() - t0)

    cfg = ForestConfig(n_trees=trees, max_depth=max_depth,
                       min_samples_split=min_split, seed=seed)
    t0 = time.time()
    forest = train(x, y, cfg, layout=layout, n_jobs=n_jobs)
    logger.info("trained %d trees in %.1fs", trees, time.time() - t0)

    model_out = Path(model_out)
    model_out.parent.mkdir(parents=True, exist_ok=True)
    forest.save(model_out)
    split_path = model_out.with_suffix(".split.json")
    split_path.write_text(json.dumps(
        {"seed": seed, "train": train_names, "test": test_names}, indent=2) + "\n")
    return model_out


# ---------------------------------------------------------------------------
# correction and evaluation


def correct_frames(frames_dir, model_path, out_dir, names=None) -> list[Path]:
    """Write corrected depth rasters D + predict(features) for each frame."""
    frames_dir = Path(frames_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    forest = RegressionForest.load(model_path)
    if names is None:
        names = [p.stem for p in sorted(frames_dir.glob("scene_*.tfim"))]
    out_paths = []
    for name in names:
        frames = FrameSet.load(frames_dir / f"{name}.tfim")
        tensor = features.extract(frames)
        if forest.layout is not None and tensor.layout != forest.layout:
            raise LayoutMismatch(
                f"{name}: extractor layout differs from the model layout"
            )
        mask = frames.valid & (frames.ground_truth > 0.0)
        corrected = frames.depth.copy()
        if mask.any():
            corrected[mask] += forest.predict(tensor.data[mask], layout=forest.layout)
        path = out_dir / f"{name}.tfim"
        formats.write_raster(path, corrected.astype(np.float32))
        out_paths.append(path)
    return out_paths


def evaluate_frames(frames_dir, corrected_dir, report_out, split_path=None,
                    model_path=None, make_figures: bool = False) -> evaluation.EvalReport:
    """Evaluate corrected rasters against their frame sets.

    Pairs files by name over the intersection of the two directories.  When
    a split manifest is given, any corrected image that belongs to the
    training set is refused outright.
    """
    frames_dir = Path(frames_dir)
    corrected_dir = Path(corrected_dir)
    corrected_paths = sorted(corrected_dir.glob("scene_*.tfim"))
    if not corrected_paths:
        raise InsufficientData(f"no corrected rasters under {corrected_dir}")
    names = [p.stem for p in corrected_paths]
    if split_path is not None:
        split = json.loads(Path(split_path).read_text())
        trained = set(split.get("train", []))
        offenders = sorted(set(names) & trained)
        if offenders:
            raise TofCornerError(
                f"refusing to evaluate training images: {', '.join(offenders)}"
            )
    frames_list, corrected_list = [], []
    for name in names:
        frame_path = frames_dir / f"{name}.tfim"
        if not frame_path.exists():
            raise InsufficientData(f"missing frame set for {name}")
        frames_list.append(FrameSet.load(frame_path))
        corrected_list.append(formats.read_raster(corrected_dir / f"{name}.tfim")[:, :, 0]
                              .astype(np.float64))

    importances_top = []
    if model_path is not None:
        forest = RegressionForest.load(model_path)
        if forest.layout:
            order = np.argsort(forest.importances)[::-1]
            importances_top = [
                (forest.layout[i], float(forest.importances[i])) for i in order
            ]

    report = evaluation.evaluate(frames_list, corrected_list,
                                 importances_top=importances_top,
                                 scene_names=names)
    report_out = Path(report_out)
    report_out.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_report_json(report, report_out)
    evaluation.write_histogram_csv(report, report_out.with_suffix(".csv"))
    if make_figures:
        figures.render_report_figures(
            report, report_out.parent / "figures",
            sample=(frames_list[0], corrected_list[0]),
        )
    return report


# ---------------------------------------------------------------------------
# point-cloud export


def export_ply(scene: CornerScene, frames: FrameSet, out_path, corrected=None,
               include=("measured", "ground_truth", "corrected")) -> Path:
    """ASCII PLY point cloud: measured red, ground truth blue, corrected green."""
    geo = scene_geometry(scene)
    dirs = _pixel_directions(scene, geo)
    mask = frames.valid & (frames.ground_truth > 0.0)
    clouds = []
    palette = {"measured": (255, 0, 0), "ground_truth": (0, 0, 255),
               "corrected": (0, 255, 0)}
    sources = {"measured": frames.depth, "ground_truth": frames.ground_truth}
    if corrected is not None:
        sources["corrected"] = np.asarray(corrected, dtype=np.float64)
    for tag in include:
        if tag not in sources:
            continue
        d = sources[tag]
        pts = geo.camera_origin[None, :] + d[mask][:, None] * dirs[mask]
        clouds.append((pts, palette[tag]))
    total = sum(p.shape[0] for p, _ in clouds)
    out_path = Path(out_path)
    with open(out_path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {total}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write("end_header\n")
        for pts, (r, g, b) in clouds:
            for x, yv, zv in pts:
                fh.write(f"{x:.6f} {yv:.6f} {zv:.6f} {r} {g} {b}\n")
    return out_path


# ---------------------------------------------------------------------------
# full pipeline


def run_pipeline(out_dir, profile: str = "desk", seed: int = 42,
                 n_jobs: int = 1, make_figures: bool = True) -> evaluation.EvalReport:
    """Generate, render, train, correct, and evaluate in one pass."""
    if profile not in PROFILES:
        raise InvalidCount(f"unknown profile {profile!r}")
    p = PROFILES[profile]
    out_dir = Path(out_dir)
    scenes_dir = out_dir / "scenes"
    frames_dir = out_dir / "frames"
    corrected_dir = out_dir / "corrected"
    model_path = out_dir / "model.tforest"
    report_path = out_dir / "report.json"

    generate_dataset("simple", p["scenes"], seed, scenes_dir,
                     resolution=p["resolution"])
    render_dataset(scenes_dir, frames_dir,
                   ToFConfig(bounce_samples=p["bounce_samples"]), n_jobs=n_jobs)
    train_model(frames_dir, model_path, trees=p["trees"],
                max_depth=p["max_depth"], min_split=p["min_split"],
                train_images=p["train_images"], seed=seed, n_jobs=n_jobs)
    split_path = model_path.with_suffix(".split.json")
    split = json.loads(split_path.read_text())
    correct_frames(frames_dir, model_path, corrected_dir, names=split["test"])
    report = evaluate_frames(frames_dir, corrected_dir, report_path,
                             split_path=split_path, model_path=model_path,
                             make_figures=make_figures)
    logger.info(
        "mean RPE %.4f -> %.4f, variance %.5f -> %.5f over %d pixels",
        report.mean_rpe_before, report.mean_rpe_after,
        report.var_rpe_before, report.var_rpe_after, report.n_pixels,
    )
    return report
