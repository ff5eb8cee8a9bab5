"""Training loop with early stopping, evaluation, ensembling, and benchmarks.

An epoch shuffles the training split, rebuilds the concatenated augmented
inputs (fresh sub-seeds per epoch unless frozen), and runs minibatch
AdamW updates under the focal loss. Validation accuracy drives both the
plateau learning-rate schedule and early stopping; the best-epoch
parameter snapshot is what training returns.
"""
from __future__ import annotations

import platform
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .augment import EVAL_EPOCH_KEY, AugmentConfig, concatenated_matrix
from .autograd import Tensor
from .errors import ConfigError, EvaluationError, TrainingError
from .metrics import ConfusionMatrix, MetricsReport, confusion, metrics
from .model import Model, ModelConfig
from .nn import LossConfig, focal_loss, softmax_np
from .optim import AdamW, OptimizerConfig
from .preprocess import PreprocessConfig, preprocess_dataset
from .signal_io import Dataset


@dataclass
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 20
    lr_factor: float = 0.5
    lr_patience: int = 5
    min_lr: float = 1e-6
    seed: int = 42
    loss: LossConfig = field(default_factory=LossConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    ensemble_size: int = 5
    augment_per_epoch: bool = True  # False freezes one augmentation draw for all epochs

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs and patience must be positive")
        if self.patience >= self.max_epochs:
            raise ConfigError(
                f"patience ({self.patience}) must be smaller than max_epochs ({self.max_epochs})"
            )
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    learning_rate: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    def best_val_acc(self) -> float:
        return max(r.val_acc for r in self.records)


def _batched_logits(model: Model, inputs: np.ndarray, batch_size: int) -> np.ndarray:
    """Eval-mode forward over [n, L] inputs, returning [n, C] logits."""
    chunks = []
    for start in range(0, inputs.shape[0], batch_size):
        batch = inputs[start : start + batch_size]
        x = Tensor(batch[:, None, :])
        chunks.append(model.forward(x).data)
    return np.concatenate(chunks, axis=0)


def train(
    dataset: Dataset,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    preprocess_cfg: Optional[PreprocessConfig] = None,
    augment_cfg: Optional[AugmentConfig] = None,
) -> tuple[Model, TrainLog]:
    """Train one model on the train split, selecting the best-validation epoch.

    The returned model carries the parameters of the epoch with the highest
    validation accuracy (earliest epoch on ties); the log records every
    epoch, the best epoch, and why training stopped.
    """
    preprocess_cfg = preprocess_cfg or PreprocessConfig()
    augment_cfg = augment_cfg or AugmentConfig()
    if not dataset.split:
        raise TrainingError("dataset has no split assignment; run stratified_split first")

    conditioned = preprocess_dataset(dataset, preprocess_cfg)
    train_set = conditioned.subset("train")
    val_set = conditioned.subset("val")
    if not len(train_set) or not len(val_set):
        raise TrainingError("train and val splits must both be non-empty")
    train_labels = train_set.labels()
    val_labels = val_set.labels()
    present = set(train_labels.tolist())
    missing = [k for k in range(dataset.num_classes) if k not in present]
    if missing:
        raise TrainingError(f"train split is missing classes {missing}")

    model = Model(model_cfg, seed=cfg.seed)
    optimizer = AdamW(model.named_parameters(), cfg.optimizer)
    val_inputs = concatenated_matrix(val_set, augment_cfg, EVAL_EPOCH_KEY)

    frozen_inputs = None
    if not cfg.augment_per_epoch:
        frozen_inputs = concatenated_matrix(train_set, augment_cfg, epoch_key=1)

    log = TrainLog()
    best_val_acc = -1.0
    best_state: Optional[dict[str, np.ndarray]] = None
    epochs_since_best = 0
    plateau_count = 0

    for epoch in range(1, cfg.max_epochs + 1):
        shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch, 1]))
        dropout_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch, 2]))
        order = shuffle_rng.permutation(len(train_set))
        if frozen_inputs is not None:
            inputs = frozen_inputs
        else:
            inputs = concatenated_matrix(train_set, augment_cfg, epoch_key=epoch)

        model.train_mode()
        loss_sum = 0.0
        correct = 0
        for batch_no, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            x = Tensor(inputs[idx][:, None, :])
            y = train_labels[idx]
            optimizer.zero_grad()
            logits = model.forward(x, rng=dropout_rng)
            loss = focal_loss(logits, y, cfg.loss)
            if not np.isfinite(loss.data):
                raise TrainingError(f"loss diverged at epoch {epoch}, batch {batch_no}")
            loss.backward()
            optimizer.step()
            loss_sum += loss.item() * idx.size
            correct += int((logits.data.argmax(axis=1) == y).sum())
        train_loss = loss_sum / len(order)
        train_acc = correct / len(order)

        model.eval_mode()
        val_logits = _batched_logits(model, val_inputs, cfg.batch_size)
        val_loss = focal_loss(Tensor(val_logits), val_labels, cfg.loss).item()
        val_acc = float((val_logits.argmax(axis=1) == val_labels).mean())

        log.records.append(
            EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc, optimizer.learning_rate)
        )

        if val_acc > best_val_acc:
            best_val_acc = val_acc
            log.best_epoch = epoch
            best_state = model.state_snapshot()
            epochs_since_best = 0
            plateau_count = 0
        else:
            epochs_since_best += 1
            plateau_count += 1
            if plateau_count >= cfg.lr_patience:
                # reduce toward min_lr, never raise (lr may start below it)
                optimizer.learning_rate = min(
                    optimizer.learning_rate,
                    max(optimizer.learning_rate * cfg.lr_factor, cfg.min_lr),
                )
                plateau_count = 0

        if epochs_since_best >= cfg.patience:
            log.stop_reason = "early_stop"
            break
    else:
        log.stop_reason = "max_epochs"

    model.load_state(best_state)
    model.eval_mode()
    return model, log


def train_ensemble(
    dataset: Dataset,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    preprocess_cfg: Optional[PreprocessConfig] = None,
    augment_cfg: Optional[AugmentConfig] = None,
) -> tuple[list[Model], list[TrainLog]]:
    """Train cfg.ensemble_size members differing only by seed (seed, seed+1, ...)."""
    models, logs = [], []
    for member in range(cfg.ensemble_size):
        member_cfg = replace(cfg, seed=cfg.seed + member, ensemble_size=1)
        model, log = train(dataset, model_cfg, member_cfg, preprocess_cfg, augment_cfg)
        models.append(model)
        logs.append(log)
    return models, logs


def ensemble_predict(
    models: Sequence[Model], inputs: np.ndarray, batch_size: int = 64, vote: str = "mean"
) -> np.ndarray:
    """Class probabilities for [n, L] inputs from one or more models.

    ``mean`` averages member softmax distributions; ``majority`` returns
    each class's share of member votes. Members must share a configuration.
    """
    if not models:
        raise EvaluationError("ensemble needs at least one model")
    first_cfg = models[0].cfg.to_dict()
    for m in models[1:]:
        if m.cfg.to_dict() != first_cfg:
            raise EvaluationError("ensemble members have differing model configurations")
    if vote not in ("mean", "majority"):
        raise ConfigError(f"vote must be 'mean' or 'majority', got {vote!r}")

    member_probs = []
    for m in models:
        m.eval_mode()
        member_probs.append(softmax_np(_batched_logits(m, inputs, batch_size)))
    stacked = np.stack(member_probs)
    if vote == "mean":
        return stacked.mean(axis=0)
    votes = stacked.argmax(axis=2)
    num_classes = stacked.shape[2]
    counts = np.stack([(votes == k).sum(axis=0) for k in range(num_classes)], axis=1)
    return counts / len(models)


def evaluate(
    models: Union[Model, Sequence[Model]],
    dataset: Dataset,
    preprocess_cfg: Optional[PreprocessConfig] = None,
    augment_cfg: Optional[AugmentConfig] = None,
    batch_size: int = 64,
    positive_class: Optional[int] = None,
    vote: str = "mean",
) -> tuple[MetricsReport, ConfusionMatrix]:
    """Run the full input pipeline and score argmax predictions.

    ``dataset`` is evaluated wholly (pass a split subset to score a split);
    inputs go through the same preprocessing and fixed-seed concatenation
    transform used at training time.
    """
    if isinstance(models, Model):
        models = [models]
    if len(dataset) == 0:
        raise EvaluationError("cannot evaluate an empty dataset")
    preprocess_cfg = preprocess_cfg or PreprocessConfig()
    augment_cfg = augment_cfg or AugmentConfig()

    conditioned = preprocess_dataset(dataset, preprocess_cfg)
    inputs = concatenated_matrix(conditioned, augment_cfg, EVAL_EPOCH_KEY)
    probs = ensemble_predict(models, inputs, batch_size, vote)
    predictions = probs.argmax(axis=1)
    labels = dataset.labels()
    cm = confusion(labels, predictions, dataset.num_classes)
    return metrics(cm, positive_class), cm


def bench(
    model: Model,
    input_length: int,
    repetitions: int = 30,
    ensemble_size: int = 5,
    warmup: int = 3,
) -> dict:
    """Parameter count, analytic 32-bit memory estimate, and measured latency.

    The memory figures assume 4 bytes per parameter (32-bit storage), per
    sample latency is the median over eval-mode single-sample forwards
    after warmup, and throughput is its reciprocal.
    """
    if repetitions < 10:
        raise ConfigError(f"bench needs at least 10 repetitions, got {repetitions}")
    count = model.parameter_count()
    memory_bytes = count * 4
    model.eval_mode()
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, model.cfg.in_channels, input_length))
    for _ in range(warmup):
        model.forward(Tensor(x))
    timings = []
    for _ in range(repetitions):
        start = time.perf_counter()
        model.forward(Tensor(x))
        timings.append(time.perf_counter() - start)
    latency = float(np.median(timings))
    return {
        "parameter_count": count,
        "memory_bytes": memory_bytes,
        "memory_mb": memory_bytes / 1e6,
        "ensemble_size": ensemble_size,
        "ensemble_memory_mb": memory_bytes * ensemble_size / 1e6,
        "input_length": input_length,
        "repetitions": repetitions,
        "latency_seconds": latency,
        "throughput_per_second": 1.0 / latency if latency > 0 else float("inf"),
        "hardware": f"{platform.system()} {platform.machine()}, "
                    f"python {platform.python_version()}",
    }
