"""Bearing fault diagnosis from vibration signals.

Fractal (multi-scale box-counting) and cepstral (MFCC) features feed four
classifiers: a one-vs-one SVM, per-condition GMMs and HMMs, and an
extension neural network.
"""

from .bundle import load_bundle, save_bundle
from .errors import VibDiagError
from .pipeline import (
    ConfusionMatrix,
    FeatureSetSpec,
    FeatureTable,
    ModelBundle,
    SweepResult,
    TrainConfig,
    evaluate,
    extract_features,
    predict,
    split,
    sweep,
    train_all,
)
from .signal_io import FaultClass, generate_synthetic, load_signal, read_manifest, segment

__version__ = "0.1.0"

__all__ = [
    "ConfusionMatrix",
    "FaultClass",
    "FeatureSetSpec",
    "FeatureTable",
    "ModelBundle",
    "SweepResult",
    "TrainConfig",
    "VibDiagError",
    "evaluate",
    "extract_features",
    "generate_synthetic",
    "load_bundle",
    "load_signal",
    "predict",
    "read_manifest",
    "save_bundle",
    "segment",
    "split",
    "sweep",
    "train_all",
]
