"""Command-line interface.

Subcommands: gen, render, train, correct, eval, ply, pipeline.  Any flag can
also be supplied through a JSON config file (--config PATH) shaped as
{"<subcommand>": {"<dest>": value, ...}}; explicit command-line flags win.

Exit codes: 0 success, 1 user error (bad arguments, missing files, refused
operations), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from .errors import InvalidCount, TofCornerError


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise InvalidCount(
            "missing required option(s): " + ", ".join(f"--{n.replace('_', '-')}" for n in missing)
        )


def _load_config(argv) -> dict:
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return json.loads(Path(argv[i + 1]).read_text())
        if a.startswith("--config="):
            return json.loads(Path(a.split("=", 1)[1]).read_text())
    return {}


def _cmd_gen(args) -> int:
    from .pipeline import generate_dataset

    _require(args, "count", "out")

    paths = generate_dataset(args.dataset, args.count, args.seed, args.out,
                             resolution=tuple(args.resolution))
    logging.getLogger("tofcorner").info("wrote %d scene manifests to %s",
                                        len(paths), args.out)
    return 0


def _cmd_render(args) -> int:
    from .pipeline import render_dataset
    from .tofsim import ToFConfig

    _require(args, "out")

    cfg = ToFConfig(
        modulation_frequency=args.fm,
        bounce_samples=args.bounce_samples,
        multipath_enabled=not args.no_multipath,
        noise_stddev=args.noise_stddev,
    )
    paths = render_dataset(args.scene_dir, args.out, cfg, n_jobs=args.jobs)
    logging.getLogger("tofcorner").info("wrote %d frame sets to %s",
                                        len(paths), args.out)
    return 0


def _cmd_train(args) -> int:
    from .pipeline import train_model

    _require(args, "model_out")

    train_model(
        args.frames_dir,
        args.model_out,
        trees=args.trees,
        max_depth=args.max_depth,
        min_split=args.min_split,
        train_images=args.train_images,
        seed=args.seed,
        pixel_fraction=args.pixel_fraction,
        n_jobs=args.jobs,
    )
    return 0


def _cmd_correct(args) -> int:
    from .pipeline import correct_frames

    _require(args, "model", "out")

    paths = correct_frames(args.frames_dir, args.model, args.out)
    logging.getLogger("tofcorner").info("wrote %d corrected rasters", len(paths))
    return 0


def _cmd_eval(args) -> int:
    from .pipeline import evaluate_frames

    _require(args, "corrected", "report")

    report = evaluate_frames(
        args.frames_dir,
        args.corrected,
        args.report,
        split_path=args.split,
        model_path=args.model,
        make_figures=args.figures,
    )
    print(
        f"mean RPE {report.mean_rpe_before:.4f} -> {report.mean_rpe_after:.4f}  "
        f"variance {report.var_rpe_before:.5f} -> {report.var_rpe_after:.5f}  "
        f"({report.n_pixels} pixels)"
    )
    return 0


def _cmd_ply(args) -> int:
    from . import formats

    _require(args, "out")
    from .pipeline import export_ply
    from .scene import load_manifest
    from .tofsim import FrameSet

    scene = load_manifest(args.scene)[0]
    frames = FrameSet.load(args.frames)
    corrected = None
    if args.corrected:
        corrected = formats.read_raster(args.corrected)[:, :, 0]
    include = tuple(args.include.split(","))
    export_ply(scene, frames, args.out, corrected=corrected, include=include)
    return 0


def _cmd_pipeline(args) -> int:
    from .pipeline import run_pipeline

    _require(args, "out")

    report = run_pipeline(args.out, profile=args.profile, seed=args.seed,
                          n_jobs=args.jobs, make_figures=not args.no_figures)
    print(
        f"mean RPE {report.mean_rpe_before:.4f} -> {report.mean_rpe_after:.4f}  "
        f"variance {report.var_rpe_before:.5f} -> {report.var_rpe_after:.5f}  "
        f"({report.n_pixels} pixels)"
    )
    return 0


def _build_parser(config: dict) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tofcorner",
        description="Synthetic ToF corner scenes with multipath and a learned "
                    "per-pixel depth correction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", help="JSON config file supplying defaults")
        p.set_defaults(func=fn)
        subparsers[name] = p
        return p

    p = add("gen", _cmd_gen, help="generate scene manifests")
    p.add_argument("dataset", choices=("simple", "challenging2", "challenging3"))
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--resolution", type=int, nargs=2, default=(200, 200),
                   metavar=("W", "H"))

    p = add("render", _cmd_render, help="render frame sets from manifests")
    p.add_argument("scene_dir")
    p.add_argument("--out", default=None)
    p.add_argument("--fm", type=float, default=2.0e7,
                   help="modulation frequency in Hz")
    p.add_argument("--bounce-samples", type=int, default=64)
    p.add_argument("--no-multipath", action="store_true")
    p.add_argument("--noise-stddev", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)

    p = add("train", _cmd_train, help="train the correction forest")
    p.add_argument("frames_dir")
    p.add_argument("--model-out", default=None)
    p.add_argument("--trees", type=int, default=150)
    p.add_argument("--max-depth", type=int, default=15)
    p.add_argument("--min-split", type=int, default=10_000)
    p.add_argument("--train-images", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pixel-fraction", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1)

    p = add("correct", _cmd_correct, help="apply a trained model")
    p.add_argument("frames_dir")
    p.add_argument("--model", default=None)
    p.add_argument("--out", default=None)

    p = add("eval", _cmd_eval, help="evaluate corrected rasters")
    p.add_argument("frames_dir")
    p.add_argument("--corrected", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--split", default=None,
                   help="split manifest; training images are refused")
    p.add_argument("--model", default=None,
                   help="model file for the importance ranking")
    p.add_argument("--figures", action="store_true",
                   help="render figures next to the report")

    p = add("ply", _cmd_ply, help="export a point cloud")
    p.add_argument("scene", help="scene manifest JSON")
    p.add_argument("frames", help="frame set .tfim")
    p.add_argument("--out", default=None)
    p.add_argument("--corrected", default=None)
    p.add_argument("--include", default="measured,ground_truth,corrected")

    p = add("pipeline", _cmd_pipeline, help="run gen/render/train/correct/eval")
    p.add_argument("--out", default=None)
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")

    # config values become defaults once every argument exists, so explicit
    # command-line flags still win
    for name, sp in subparsers.items():
        if name in config:
            sp.set_defaults(**config[name])

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        config = _load_config(argv)
        parser = _build_parser(config)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            code = exc.code if exc.code is not None else 0
            return 0 if code == 0 else 1
        return args.func(args) or 0
    except (TofCornerError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
