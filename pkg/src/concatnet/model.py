"""The classifier network: convolutional stem, three residual stages,
a sigmoid attention gate over the pooled features, and a two-layer head.

Logits are the output contract; softmax lives in the loss and at
prediction time, not in the network body.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import checkpoint
from .autograd import Tensor
from .errors import ConfigError, ShapeError
from .nn import (
    BatchNorm1d,
    Conv1d,
    Linear,
    adaptive_avg_pool_to_1,
    conv_out_len,
    dropout,
    maxpool1d,
    relu,
    sigmoid,
)


@dataclass
class ModelConfig:
    in_channels: int = 1
    num_classes: int = 2
    stem_channels: int = 64
    stem_kernel: int = 15
    stem_stride: int = 2
    stem_padding: int = 7
    pool_kernel: int = 3
    pool_stride: int = 2
    pool_padding: int = 1
    # (out_channels, blocks, first_stride) per residual stage
    layers: tuple[tuple[int, int, int], ...] = ((128, 2, 2), (256, 2, 2), (512, 2, 2))
    block_kernel: int = 5
    block_padding: int = 2
    attention_divisor: int = 8
    classifier_hidden: int = 256
    classifier_dropout: float = 0.6

    def __post_init__(self):
        self.layers = tuple(tuple(stage) for stage in self.layers)
        if self.num_classes < 1:
            raise ConfigError("num_classes must be positive")
        if not self.layers:
            raise ConfigError("at least one residual stage is required")
        if self.feature_width % self.attention_divisor != 0:
            raise ConfigError(
                f"final width {self.feature_width} not divisible by "
                f"attention divisor {self.attention_divisor}"
            )
        if not 0.0 <= self.classifier_dropout < 1.0:
            raise ConfigError("classifier_dropout must lie in [0, 1)")

    @property
    def feature_width(self) -> int:
        return self.layers[-1][0]

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "num_classes": self.num_classes,
            "stem_channels": self.stem_channels,
            "stem_kernel": self.stem_kernel,
            "stem_stride": self.stem_stride,
            "stem_padding": self.stem_padding,
            "pool_kernel": self.pool_kernel,
            "pool_stride": self.pool_stride,
            "pool_padding": self.pool_padding,
            "layers": [list(stage) for stage in self.layers],
            "block_kernel": self.block_kernel,
            "block_padding": self.block_padding,
            "attention_divisor": self.attention_divisor,
            "classifier_hidden": self.classifier_hidden,
            "classifier_dropout": self.classifier_dropout,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        doc = dict(doc)
        doc["layers"] = tuple(tuple(stage) for stage in doc["layers"])
        return cls(**doc)


class ResNetBlock:
    """Two convolutions with batch norm and a skip connection.

    The first convolution may stride; the identity path is downsampled by a
    1x1 convolution plus batch norm whenever the stride or channel count
    changes. A final ReLU follows the sum.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        stride: int,
        kernel: int,
        padding: int,
        rng: np.random.Generator,
    ):
        self.conv1 = Conv1d(in_channels, out_channels, kernel, stride, padding, rng)
        self.bn1 = BatchNorm1d(out_channels)
        self.conv2 = Conv1d(out_channels, out_channels, kernel, 1, padding, rng)
        self.bn2 = BatchNorm1d(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.downsample_conv: Optional[Conv1d] = Conv1d(
                in_channels, out_channels, 1, stride, 0, rng
            )
            self.downsample_bn: Optional[BatchNorm1d] = BatchNorm1d(out_channels)
        else:
            self.downsample_conv = None
            self.downsample_bn = None

    def forward(self, x: Tensor, training: bool) -> Tensor:
        out = relu(self.bn1(self.conv1(x), training))
        out = self.bn2(self.conv2(out), training)
        if self.downsample_conv is not None:
            identity = self.downsample_bn(self.downsample_conv(x), training)
        else:
            identity = x
        if out.shape != identity.shape:
            raise ShapeError(
                f"main path {out.shape} and skip path {identity.shape} disagree"
            )
        return relu(out + identity)

    def components(self):
        yield "conv1", self.conv1
        yield "bn1", self.bn1
        yield "conv2", self.conv2
        yield "bn2", self.bn2
        if self.downsample_conv is not None:
            yield "downsample_conv", self.downsample_conv
            yield "downsample_bn", self.downsample_bn


class Model:
    """The assembled network; parameters are reproducible from (config, seed)."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.training = True
        rng = np.random.default_rng(np.random.SeedSequence([seed]))

        self.stem_conv = Conv1d(
            cfg.in_channels, cfg.stem_channels, cfg.stem_kernel, cfg.stem_stride, cfg.stem_padding, rng
        )
        self.stem_bn = BatchNorm1d(cfg.stem_channels)

        self.stages: list[list[ResNetBlock]] = []
        in_channels = cfg.stem_channels
        for out_channels, blocks, first_stride in cfg.layers:
            stage = []
            for b in range(blocks):
                stride = first_stride if b == 0 else 1
                stage.append(
                    ResNetBlock(
                        in_channels, out_channels, stride, cfg.block_kernel, cfg.block_padding, rng
                    )
                )
                in_channels = out_channels
            self.stages.append(stage)

        width = cfg.feature_width
        bottleneck = width // cfg.attention_divisor
        self.attention_fc1 = Linear(width, bottleneck, rng)
        self.attention_fc2 = Linear(bottleneck, width, rng)
        self.classifier_fc1 = Linear(width, cfg.classifier_hidden, rng)
        self.classifier_fc2 = Linear(cfg.classifier_hidden, cfg.num_classes, rng)

    def train_mode(self) -> "Model":
        self.training = True
        return self

    def eval_mode(self) -> "Model":
        self.training = False
        return self

    def attention(self, z: Tensor) -> Tensor:
        """Gate pooled features elementwise with sigmoid weights in (0, 1)."""
        weights = sigmoid(self.attention_fc2(relu(self.attention_fc1(z))))
        return z * weights

    def _stage_geometry(self) -> list[tuple[str, int, int, int]]:
        """(name, kernel, stride, padding) for every length-changing stage."""
        cfg = self.cfg
        stages = [
            ("stem", cfg.stem_kernel, cfg.stem_stride, cfg.stem_padding),
            ("maxpool", cfg.pool_kernel, cfg.pool_stride, cfg.pool_padding),
        ]
        for i, (_, blocks, first_stride) in enumerate(cfg.layers):
            for b in range(blocks):
                stride = first_stride if b == 0 else 1
                stages.append(
                    (f"layer{i + 1}.block{b}", cfg.block_kernel, stride, cfg.block_padding)
                )
        return stages

    def _validate_length(self, length: int) -> None:
        for name, kernel, stride, padding in self._stage_geometry():
            if length + 2 * padding < kernel or length < stride:
                raise ShapeError(
                    f"{name}: temporal length {length} too short "
                    f"(kernel {kernel}, stride {stride})"
                )
            length = conv_out_len(length, kernel, stride, padding)

    def forward(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Input [batch, in_channels, length] -> logits [batch, num_classes].

        ``rng`` drives dropout and is only needed in training mode.
        """
        if x.data.ndim != 3:
            raise ShapeError(f"input must be [batch, channels, length], got {x.shape}")
        self._validate_length(x.shape[2])
        stage_name = "stem"
        try:
            h = relu(self.stem_bn(self.stem_conv(x), self.training))
            stage_name = "maxpool"
            h = maxpool1d(h, self.cfg.pool_kernel, self.cfg.pool_stride, self.cfg.pool_padding)
            for i, stage in enumerate(self.stages):
                stage_name = f"layer{i + 1}"
                for block in stage:
                    h = block.forward(h, self.training)
        except ShapeError as exc:
            raise ShapeError(f"{stage_name}: {exc}") from None
        h = adaptive_avg_pool_to_1(h)
        z = h.reshape(h.shape[0], h.shape[1])
        z = self.attention(z)
        h = relu(self.classifier_fc1(z))
        h = dropout(h, self.cfg.classifier_dropout, self.training, rng)
        return self.classifier_fc2(h)

    def __call__(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        return self.forward(x, rng)

    def _named_components(self):
        yield "stem.conv", self.stem_conv
        yield "stem.bn", self.stem_bn
        for i, stage in enumerate(self.stages):
            for b, block in enumerate(stage):
                for part_name, part in block.components():
                    yield f"layer{i + 1}.block{b}.{part_name}", part
        yield "attention.fc1", self.attention_fc1
        yield "attention.fc2", self.attention_fc2
        yield "classifier.fc1", self.classifier_fc1
        yield "classifier.fc2", self.classifier_fc2

    def named_parameters(self) -> list[tuple[str, Tensor, bool]]:
        """All trainable tensors as (name, tensor, weight-decay eligible)."""
        out = []
        for prefix, component in self._named_components():
            for name, tensor, decay in component.named_parameters():
                out.append((f"{prefix}.{name}", tensor, decay))
        return out

    def named_buffers(self) -> list[tuple[str, np.ndarray]]:
        """Non-trainable state (batch-norm running statistics)."""
        out = []
        for prefix, component in self._named_components():
            if hasattr(component, "named_buffers"):
                for name, arr in component.named_buffers():
                    out.append((f"{prefix}.{name}", arr))
        return out

    def parameter_count(self) -> int:
        return sum(p.size for _, p, _ in self.named_parameters())

    def zero_grad(self) -> None:
        for _, p, _ in self.named_parameters():
            p.zero_grad()

    def state_snapshot(self) -> dict[str, np.ndarray]:
        """Copies of every parameter and buffer, keyed by name."""
        state = {name: p.data.copy() for name, p, _ in self.named_parameters()}
        state.update({name: arr.copy() for name, arr in self.named_buffers()})
        return state

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        """Overwrite parameters and buffers in place from a snapshot."""
        for name, p, _ in self.named_parameters():
            if name not in state:
                raise ShapeError(f"state is missing parameter {name!r}")
            if state[name].shape != p.data.shape:
                raise ShapeError(f"parameter {name!r} has shape {state[name].shape}, "
                                 f"expected {p.data.shape}")
            p.data[...] = state[name]
        for name, arr in self.named_buffers():
            if name not in state:
                raise ShapeError(f"state is missing buffer {name!r}")
            arr[...] = state[name]

    def describe(self, input_length: int) -> str:
        """Per-stage table of output shapes and parameter counts."""
        rows: list[tuple[str, str, int]] = []
        length = conv_out_len(input_length, self.cfg.stem_kernel, self.cfg.stem_stride, self.cfg.stem_padding)
        stem_params = sum(p.size for group in (self.stem_conv, self.stem_bn)
                          for _, p, _ in group.named_parameters())
        rows.append(("stem", f"[{self.cfg.stem_channels}, {length}]", stem_params))
        length = conv_out_len(length, self.cfg.pool_kernel, self.cfg.pool_stride, self.cfg.pool_padding)
        rows.append(("maxpool", f"[{self.cfg.stem_channels}, {length}]", 0))
        for i, (stage, (out_channels, blocks, first_stride)) in enumerate(
            zip(self.stages, self.cfg.layers)
        ):
            for b, block in enumerate(stage):
                stride = first_stride if b == 0 else 1
                length = conv_out_len(length, self.cfg.block_kernel, stride, self.cfg.block_padding)
                count = sum(p.size for _, part in block.components()
                            for _, p, _ in part.named_parameters())
                rows.append((f"layer{i + 1}.block{b}", f"[{out_channels}, {length}]", count))
        width = self.cfg.feature_width
        rows.append(("avgpool", f"[{width}, 1]", 0))
        att_params = sum(p.size for group in (self.attention_fc1, self.attention_fc2)
                         for _, p, _ in group.named_parameters())
        rows.append(("attention", f"[{width}]", att_params))
        cls_params = sum(p.size for group in (self.classifier_fc1, self.classifier_fc2)
                         for _, p, _ in group.named_parameters())
        rows.append(("classifier", f"[{self.cfg.num_classes}]", cls_params))

        name_w = max(len(r[0]) for r in rows)
        shape_w = max(len(r[1]) for r in rows)
        lines = [f"{'stage':<{name_w}}  {'output':<{shape_w}}  params"]
        for name, shape, count in rows:
            lines.append(f"{name:<{name_w}}  {shape:<{shape_w}}  {count}")
        lines.append(f"total trainable parameters: {self.parameter_count()}")
        return "\n".join(lines) + "\n"


def save_model(path: str | Path, model: Model, extra_config: Optional[dict] = None) -> None:
    """Write parameters and running statistics to the checkpoint container."""
    arrays = [(name, p.data) for name, p, _ in model.named_parameters()]
    arrays += model.named_buffers()
    config = {"model": model.cfg.to_dict(), "seed": model.seed}
    if extra_config:
        config.update(extra_config)
    checkpoint.save(path, arrays, config)


def load_model(path: str | Path) -> tuple[Model, dict]:
    """Rebuild a model from a checkpoint; the load is bit-exact."""
    config, arrays = checkpoint.load(path)
    cfg = ModelConfig.from_dict(config["model"])
    model = Model(cfg, seed=int(config.get("seed", 0)))
    model.load_state(arrays)
    model.eval_mode()
    return model, config
