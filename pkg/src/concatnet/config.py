"""Flat run configuration shared by every pipeline command.

One JSON document carries the preprocessing, augmentation, model, training
and split settings under flat keys. Command-line flags override file
values, defaults fill the rest, and unknown keys are rejected so typos
cannot silently fall back to defaults.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .augment import AugmentConfig
from .errors import ConfigError
from .model import ModelConfig
from .nn import LossConfig
from .optim import OptimizerConfig
from .preprocess import DenoiseConfig, PreprocessConfig, WaveletSpec
from .signal_io import SplitSpec
from .training import TrainConfig

SCHEMA_VERSION = "1"

# key -> (default, parser); parsers also serve as CLI flag types
DEFAULTS: dict[str, object] = {
    "schema_version": SCHEMA_VERSION,
    "seed": 42,
    # split
    "train_fraction": 0.8,
    "val_fraction": 0.1,
    "test_fraction": 0.1,
    "stratified": True,
    # preprocessing
    "wavelet_level": 4,
    "threshold_scale": 0.5,
    "baseline_kernel": 51,
    "standardize_eps": 1e-8,
    "clip_bound": 5.0,
    # augmentation
    "noise_std": 0.01,
    "scale_factor": 1.2,
    "shift_amount": 10,
    "warp_factor": 0.2,
    "cutout_segments": 2,
    "cutout_length": 50,
    "jitter_std": 0.05,
    # model
    "num_classes": None,  # inferred from the data when unset
    "stem_channels": 64,
    "stem_kernel": 15,
    "stem_stride": 2,
    "stem_padding": 7,
    "pool_kernel": 3,
    "pool_stride": 2,
    "pool_padding": 1,
    "layers": [[128, 2, 2], [256, 2, 2], [512, 2, 2]],
    "block_kernel": 5,
    "block_padding": 2,
    "attention_divisor": 8,
    "classifier_hidden": 256,
    "classifier_dropout": 0.6,
    # training
    "batch_size": 64,
    "max_epochs": 100,
    "patience": 20,
    "learning_rate": 1e-3,
    "lr_factor": 0.5,
    "lr_patience": 5,
    "min_lr": 1e-6,
    "gamma": 2.0,
    "alpha": 1.0,
    "beta1": 0.9,
    "beta2": 0.999,
    "adam_eps": 1e-8,
    "weight_decay": 0.01,
    "ensemble_size": 5,
    "augment_per_epoch": True,
}


class RunConfig:
    """Resolved flat configuration with typed views onto each subsystem."""

    def __init__(self, values: dict):
        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        merged = dict(DEFAULTS)
        merged.update(values)
        if str(merged["schema_version"]) != SCHEMA_VERSION:
            raise ConfigError(
                f"config schema version {merged['schema_version']!r} is not supported "
                f"(expected {SCHEMA_VERSION!r})"
            )
        self.values = merged

    def __getitem__(self, key: str):
        return self.values[key]

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            train_fraction=self.values["train_fraction"],
            val_fraction=self.values["val_fraction"],
            test_fraction=self.values["test_fraction"],
            seed=self.values["seed"],
            stratified=self.values["stratified"],
        )

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(
            denoise=DenoiseConfig(
                wavelet=WaveletSpec(level=self.values["wavelet_level"]),
                threshold_scale=self.values["threshold_scale"],
            ),
            baseline_kernel=self.values["baseline_kernel"],
            standardize_eps=self.values["standardize_eps"],
            clip_bound=self.values["clip_bound"],
        )

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(
            noise_std=self.values["noise_std"],
            scale_factor=self.values["scale_factor"],
            shift_amount=self.values["shift_amount"],
            warp_factor=self.values["warp_factor"],
            cutout_segments=self.values["cutout_segments"],
            cutout_length=self.values["cutout_length"],
            jitter_std=self.values["jitter_std"],
            seed=self.values["seed"],
        )

    def model_config(self, num_classes: Optional[int] = None) -> ModelConfig:
        resolved = self.values["num_classes"] if num_classes is None else num_classes
        if resolved is None:
            raise ConfigError("num_classes is unset and cannot be inferred")
        return ModelConfig(
            num_classes=int(resolved),
            stem_channels=self.values["stem_channels"],
            stem_kernel=self.values["stem_kernel"],
            stem_stride=self.values["stem_stride"],
            stem_padding=self.values["stem_padding"],
            pool_kernel=self.values["pool_kernel"],
            pool_stride=self.values["pool_stride"],
            pool_padding=self.values["pool_padding"],
            layers=tuple(tuple(stage) for stage in self.values["layers"]),
            block_kernel=self.values["block_kernel"],
            block_padding=self.values["block_padding"],
            attention_divisor=self.values["attention_divisor"],
            classifier_hidden=self.values["classifier_hidden"],
            classifier_dropout=self.values["classifier_dropout"],
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.values["batch_size"],
            max_epochs=self.values["max_epochs"],
            patience=self.values["patience"],
            lr_factor=self.values["lr_factor"],
            lr_patience=self.values["lr_patience"],
            min_lr=self.values["min_lr"],
            seed=self.values["seed"],
            loss=LossConfig(gamma=self.values["gamma"], alpha=self.values["alpha"]),
            optimizer=OptimizerConfig(
                learning_rate=self.values["learning_rate"],
                beta1=self.values["beta1"],
                beta2=self.values["beta2"],
                eps=self.values["adam_eps"],
                weight_decay=self.values["weight_decay"],
            ),
            ensemble_size=self.values["ensemble_size"],
            augment_per_epoch=self.values["augment_per_epoch"],
        )

    def echo(self, path: str | Path) -> None:
        """Write the fully resolved configuration for provenance."""
        with open(path, "w") as fh:
            json.dump(self.values, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_run_config(path: Optional[str | Path] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then file values, then non-None overrides (flags win)."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        values.update(loaded)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(values)
