"""Synthetic multipath-corrupted ToF corner scenes and a learned correction."""

from .brdf import eval_brdf
from .errors import TofCornerError
from .features import FeatureTensor, confidence, extract, feature_layout
from .forest import ForestConfig, RegressionForest, train
from .scene import (
    CornerScene,
    SceneKind,
    WardMaterial,
    builtin_materials,
    sample_challenging_scene,
    sample_simple_scene,
    scene_geometry,
)
from .tofsim import FrameSet, ToFConfig, combine_phasors, render

__version__ = "0.1.0"

__all__ = [
    "CornerScene",
    "FeatureTensor",
    "ForestConfig",
    "FrameSet",
    "RegressionForest",
    "SceneKind",
    "ToFConfig",
    "TofCornerError",
    "WardMaterial",
    "builtin_materials",
    "combine_phasors",
    "confidence",
    "eval_brdf",
    "extract",
    "feature_layout",
    "render",
    "sample_challenging_scene",
    "sample_simple_scene",
    "scene_geometry",
    "train",
    "__version__",
]
