"""Biomedical time-series classification built on concatenation augmentation.

The pipeline: wavelet-denoise and standardize each fixed-length signal,
concatenate seven augmented variants of it into one wide training
instance, and classify with a 1-D residual network gated by a feature
attention block, trained under the focal loss with AdamW.
"""

__version__ = "0.1.0"

from .augment import AugmentConfig, VariantKind, build_concatenated
from .autograd import Tensor
from .errors import ConcatnetError
from .metrics import ConfusionMatrix, MetricsReport, confusion, metrics
from .model import Model, ModelConfig, load_model, save_model
from .nn import LossConfig, focal_loss
from .optim import AdamW, OptimizerConfig
from .preprocess import (
    DenoiseConfig,
    PreprocessConfig,
    WaveletSpec,
    denoise,
    dwt,
    idwt,
    preprocess_pipeline,
    remove_baseline,
    soft_threshold,
    standardize,
)
from .signal_io import (
    Dataset,
    Signal,
    SplitSpec,
    generate_synthetic,
    load_csv_dataset,
    save_csv_dataset,
    stratified_split,
)
from .training import TrainConfig, TrainLog, bench, ensemble_predict, evaluate, train

__all__ = [
    "AdamW",
    "AugmentConfig",
    "ConcatnetError",
    "ConfusionMatrix",
    "Dataset",
    "DenoiseConfig",
    "LossConfig",
    "MetricsReport",
    "Model",
    "ModelConfig",
    "OptimizerConfig",
    "PreprocessConfig",
    "Signal",
    "SplitSpec",
    "Tensor",
    "TrainConfig",
    "TrainLog",
    "VariantKind",
    "WaveletSpec",
    "bench",
    "build_concatenated",
    "confusion",
    "denoise",
    "dwt",
    "ensemble_predict",
    "evaluate",
    "focal_loss",
    "generate_synthetic",
    "idwt",
    "load_csv_dataset",
    "load_model",
    "metrics",
    "preprocess_pipeline",
    "remove_baseline",
    "save_csv_dataset",
    "save_model",
    "soft_threshold",
    "standardize",
    "stratified_split",
    "train",
]
