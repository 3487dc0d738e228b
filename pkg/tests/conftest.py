import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


def _jobs() -> int:
    try:
        return max(1, min(4, len(os.sched_getaffinity(0))))
    except AttributeError:
        return max(1, min(4, os.cpu_count() or 1))


@pytest.fixture(scope="session")
def n_jobs():
    return _jobs()


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory, n_jobs):
    """Two independent desk-profile pipeline runs with the same seed.

    Shared by the trend, negative-control, and determinism acceptance
    criteria; figures are skipped to keep the comparison to the data
    artifacts.
    """
    from tofcorner.pipeline import run_pipeline

    dirs, reports = [], []
    for tag in ("a", "b"):
        out = tmp_path_factory.mktemp(f"desk_{tag}")
        reports.append(
            run_pipeline(out, profile="desk", seed=42, n_jobs=n_jobs,
                         make_figures=False)
        )
        dirs.append(out)
    return dirs, reports


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Six rendered 32x32 simple scenes for CLI and pipeline tests."""
    from tofcorner.pipeline import generate_dataset, render_dataset
    from tofcorner.tofsim import ToFConfig

    root = tmp_path_factory.mktemp("small")
    scenes = root / "scenes"
    frames = root / "frames"
    generate_dataset("simple", 6, 7, scenes, resolution=(32, 32))
    render_dataset(scenes, frames, ToFConfig(bounce_samples=16))
    return root
