"""Seven-variant augmentation and end-to-end concatenation.

Each input signal yields seven variants (original, noisy, scaled, shifted,
time-warped, cutout, jittered) that are concatenated along the time axis
into a single training instance of seven times the original length.

Every stochastic variant draws from its own random stream, keyed by
(seed, sample key, epoch key, variant), so augmentation is reproducible
and independent of evaluation order.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .signal_io import Dataset

EVAL_EPOCH_KEY = 0  # training epochs use keys 1..max_epochs


class VariantKind(IntEnum):
    """Variants in concatenation order; the integer value is the segment slot."""

    ORIGINAL = 0
    NOISY = 1
    SCALED = 2
    SHIFTED = 3
    TIME_WARPED = 4
    CUTOUT = 5
    JITTERED = 6


@dataclass
class AugmentConfig:
    noise_std: float = 0.01
    scale_factor: float = 1.2
    shift_amount: int = 10
    warp_factor: float = 0.2
    cutout_segments: int = 2
    cutout_length: int = 50
    jitter_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0 or self.jitter_std < 0:
            raise ConfigError("noise_std and jitter_std must be non-negative")
        if not 0.0 <= self.warp_factor < 2.0:
            raise ConfigError(f"warp_factor must lie in [0, 2), got {self.warp_factor}")
        if self.cutout_segments < 0:
            raise ConfigError("cutout_segments must be non-negative")
        if self.cutout_length < 1:
            raise ConfigError("cutout_length must be positive")


def sample_key(source_id: Optional[str], index: int = 0) -> int:
    """Stable per-sample stream key: a CRC of the source id, or the row index."""
    if source_id is None:
        return index
    return zlib.crc32(source_id.encode("utf-8"))


def variant_rng(seed: int, key: int, epoch_key: int, kind: VariantKind) -> np.random.Generator:
    """The random stream a given variant of a given sample consumes."""
    return np.random.default_rng(np.random.SeedSequence([seed, key, epoch_key, int(kind)]))


def add_noise(s: Sequence[float], std: float, rng: np.random.Generator) -> np.ndarray:
    """Add zero-mean Gaussian noise of the given standard deviation."""
    x = np.asarray(s, dtype=np.float64)
    if std == 0:
        return x.copy()
    return x + rng.normal(0.0, std, size=x.size)


def scale(s: Sequence[float], factor: float) -> np.ndarray:
    """Multiply the whole signal by a constant gain."""
    return np.asarray(s, dtype=np.float64) * factor


def circular_shift(s: Sequence[float], amount: int) -> np.ndarray:
    """Rotate the signal so out[n] = s[(n - amount) mod N]."""
    return np.roll(np.asarray(s, dtype=np.float64), amount)


def time_warp(s: Sequence[float], warp_factor: float, rng: np.random.Generator) -> np.ndarray:
    """Randomly stretch/compress the time axis by remapping sample indices.

    Each index i moves to round(i * (1 + warp_factor * r_i)) with
    r_i ~ Uniform(-0.5, 0.5), clipped to the valid range. The output starts
    as a copy of the input, so indices nothing maps to keep their original
    value; colliding writes resolve to the last writer.
    """
    x = np.asarray(s, dtype=np.float64)
    out = x.copy()
    n = x.size
    r = rng.uniform(-0.5, 0.5, size=n)
    targets = np.clip(np.rint(np.arange(n) * (1.0 + warp_factor * r)), 0, n - 1).astype(np.int64)
    for i in range(n):
        out[targets[i]] = x[i]
    return out


def cutout(
    s: Sequence[float], n_segments: int, seg_length: int, rng: np.random.Generator
) -> np.ndarray:
    """Zero out random contiguous windows (overlap allowed)."""
    x = np.asarray(s, dtype=np.float64).copy()
    n = x.size
    if seg_length > n:
        raise ConfigError(f"cutout length {seg_length} exceeds signal length {n}")
    for _ in range(n_segments):
        start = int(rng.integers(0, n - seg_length + 1))
        x[start : start + seg_length] = 0.0
    return x


def amplitude_jitter(s: Sequence[float], std: float, rng: np.random.Generator) -> np.ndarray:
    """Per-sample Gaussian amplitude fluctuation."""
    return add_noise(s, std, rng)


def build_concatenated(
    s: Sequence[float],
    cfg: AugmentConfig,
    key: int = 0,
    epoch_key: int = EVAL_EPOCH_KEY,
) -> np.ndarray:
    """Concatenate the seven variants of one signal, original first.

    Deterministic in (s, cfg, key, epoch_key); the output has exactly seven
    times the input length and its first segment equals the input.
    """
    x = np.asarray(s, dtype=np.float64)

    def rng(kind: VariantKind) -> np.random.Generator:
        return variant_rng(cfg.seed, key, epoch_key, kind)

    segments = [
        x,
        add_noise(x, cfg.noise_std, rng(VariantKind.NOISY)),
        scale(x, cfg.scale_factor),
        circular_shift(x, cfg.shift_amount),
        time_warp(x, cfg.warp_factor, rng(VariantKind.TIME_WARPED)),
        cutout(x, cfg.cutout_segments, cfg.cutout_length, rng(VariantKind.CUTOUT)),
        amplitude_jitter(x, cfg.jitter_std, rng(VariantKind.JITTERED)),
    ]
    return np.concatenate(segments)


def concatenated_matrix(
    dataset: Dataset, cfg: AugmentConfig, epoch_key: int = EVAL_EPOCH_KEY
) -> np.ndarray:
    """Stack the concatenated inputs of every signal into an [n, 7N] matrix."""
    rows = [
        build_concatenated(sig.samples, cfg, key=sample_key(sig.source_id, i), epoch_key=epoch_key)
        for i, sig in enumerate(dataset.signals)
    ]
    return np.stack(rows)
