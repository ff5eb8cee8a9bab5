"""AdamW: Adam moments plus decoupled weight decay.

The decay term is applied directly to the parameter in the update step,
not folded into the gradient, and is skipped for biases and normalization
parameters.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .autograd import Tensor
from .errors import ConfigError, NumericsError, OptimizerError


@dataclass
class OptimizerConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be non-negative")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta coefficients must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be non-negative")


class AdamW:
    """Decoupled-decay Adam over named parameters.

    ``params`` yields (name, tensor, decay_eligible) triples; biases and
    batch-norm scale/shift register with decay_eligible=False and are never
    decayed. ``learning_rate`` is mutable so a scheduler can adjust it.
    """

    def __init__(self, params: Iterable[tuple[str, Tensor, bool]], cfg: OptimizerConfig):
        self.cfg = cfg
        self.learning_rate = cfg.learning_rate
        self.step_count = 0
        self._params = list(params)
        if not self._params:
            raise OptimizerError("optimizer needs at least one parameter")
        names = [name for name, _, _ in self._params]
        if len(set(names)) != len(names):
            raise OptimizerError("parameter names must be unique")
        self._m = {name: np.zeros_like(p.data) for name, p, _ in self._params}
        self._v = {name: np.zeros_like(p.data) for name, p, _ in self._params}

    def zero_grad(self) -> None:
        for _, p, _ in self._params:
            p.zero_grad()

    def step(self) -> None:
        """Apply one update; every parameter must carry a finite gradient."""
        self.step_count += 1
        beta1, beta2 = self.cfg.beta1, self.cfg.beta2
        correction1 = 1.0 - beta1**self.step_count
        correction2 = 1.0 - beta2**self.step_count
        for name, p, decay_eligible in self._params:
            if p.grad is None:
                raise OptimizerError(f"parameter {name!r} has no gradient")
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NumericsError(f"parameter {name!r} has a non-finite gradient")
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            update = (m / correction1) / (np.sqrt(v / correction2) + self.cfg.eps)
            if decay_eligible and self.cfg.weight_decay:
                update = update + self.cfg.weight_decay * p.data
            p.data -= self.learning_rate * update

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Moment buffers, for tests and diagnostics."""
        out = []
        for name, _, _ in self._params:
            out.append((f"{name}.m", self._m[name]))
            out.append((f"{name}.v", self._v[name]))
        return out
