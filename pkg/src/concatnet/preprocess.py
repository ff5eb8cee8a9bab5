"""Signal conditioning: wavelet denoising, baseline removal, standardization.

The wavelet transform is an 8-tap Daubechies-4 filter bank with symmetric
(half-sample) boundary extension, which keeps decomposition/reconstruction
an exact identity for arbitrary signal lengths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .signal_io import Dataset, Signal

# Daubechies-4 scaling coefficients from the standard tabulation; the test
# suite re-derives their defining properties (sqrt(2) sum, orthonormal
# double shifts) instead of trusting these literals.
DB4_LOWPASS = (
    0.230377813308855230,
    0.714846570552541500,
    0.630880767929590400,
    -0.027983769416983850,
    -0.187034811718881140,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
)


def _quadrature_mirror(lowpass: np.ndarray) -> np.ndarray:
    # alternate signs, then time-reverse: the synthesis highpass that pairs
    # with this synthesis lowpass for perfect reconstruction
    signs = np.array([(-1.0) ** k for k in range(len(lowpass))])
    return (signs * lowpass)[::-1]


@dataclass
class WaveletSpec:
    """Daubechies-4 filter bank and decomposition depth."""

    family: str = "Daubechies-4"
    level: int = 4
    lowpass: np.ndarray = field(default_factory=lambda: np.array(DB4_LOWPASS))
    highpass: np.ndarray = field(default_factory=lambda: _quadrature_mirror(np.array(DB4_LOWPASS)))

    def __post_init__(self):
        self.lowpass = np.asarray(self.lowpass, dtype=np.float64)
        self.highpass = np.asarray(self.highpass, dtype=np.float64)
        if self.level < 1:
            raise ConfigError(f"decomposition level must be positive, got {self.level}")
        if abs(self.lowpass.sum() - math.sqrt(2.0)) > 1e-12:
            raise ConfigError("lowpass filter must sum to sqrt(2)")
        if not np.allclose(self.highpass, _quadrature_mirror(self.lowpass), atol=1e-15):
            raise ConfigError("highpass filter must be the quadrature mirror of the lowpass")

    @property
    def filter_length(self) -> int:
        return self.lowpass.size


@dataclass
class DenoiseConfig:
    """Threshold rule for wavelet shrinkage.

    The threshold is ``threshold_scale`` times the population standard
    deviation of the detail band selected by ``threshold_band`` (-1 picks
    the finest, i.e. highest-frequency, band).
    """

    wavelet: WaveletSpec = field(default_factory=WaveletSpec)
    threshold_scale: float = 0.5
    threshold_band: int = -1

    def __post_init__(self):
        if self.threshold_scale <= 0:
            raise ConfigError(f"threshold_scale must be positive, got {self.threshold_scale}")


@dataclass
class PreprocessConfig:
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    baseline_kernel: int = 51
    standardize_eps: float = 1e-8
    clip_bound: float = 5.0

    def __post_init__(self):
        if self.baseline_kernel < 3 or self.baseline_kernel % 2 == 0:
            raise ConfigError(
                f"baseline kernel must be an odd integer >= 3, got {self.baseline_kernel}"
            )
        if self.standardize_eps <= 0 or self.clip_bound <= 0:
            raise ConfigError("standardize_eps and clip_bound must be positive")


def _symmetric_extend(x: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([x[:n][::-1], x, x[-n:][::-1]])


def band_length(n: int, filter_length: int) -> int:
    """Coefficient count produced by one decomposition of a length-n signal."""
    return (n + filter_length - 1) // 2


def max_level(n: int, filter_length: int = 8) -> int:
    """Deepest decomposition whose every stage sees a full filter's worth of input."""
    level = 0
    while n >= filter_length:
        n = band_length(n, filter_length)
        level += 1
    return level


def _dwt_single(x: np.ndarray, spec: WaveletSpec) -> tuple[np.ndarray, np.ndarray]:
    flen = spec.filter_length
    xe = _symmetric_extend(x, flen - 1)
    # convolving with the reversed filter correlates with the filter itself
    approx = np.convolve(xe, spec.lowpass[::-1], mode="valid")[1::2]
    detail = np.convolve(xe, spec.highpass[::-1], mode="valid")[1::2]
    return approx, detail


def _idwt_single(
    approx: np.ndarray, detail: np.ndarray, target: int, spec: WaveletSpec
) -> np.ndarray:
    if approx.size != detail.size:
        raise ShapeError(
            f"approximation band ({approx.size}) and detail band ({detail.size}) differ in length"
        )
    up_a = np.zeros(2 * approx.size - 1)
    up_a[::2] = approx
    up_d = np.zeros(2 * detail.size - 1)
    up_d[::2] = detail
    y = np.convolve(up_a, spec.lowpass, mode="full") + np.convolve(up_d, spec.highpass, mode="full")
    first = (y.size - target) // 2
    if first < 0:
        raise ShapeError(f"bands too short to reconstruct {target} samples")
    return y[first : first + target]


def dwt(signal: Sequence[float], spec: WaveletSpec) -> list[np.ndarray]:
    """Multi-level decomposition into bands [cA_L, cD_L, ..., cD_1].

    The approximation band comes first, followed by detail bands ordered
    coarse to fine; the finest (highest-frequency) band is last.
    """
    x = np.asarray(signal, dtype=np.float64)
    admissible = max_level(x.size, spec.filter_length)
    if spec.level > admissible:
        raise ShapeError(
            f"signal of length {x.size} admits at most level {admissible}, "
            f"requested {spec.level}"
        )
    details: list[np.ndarray] = []
    approx = x
    for _ in range(spec.level):
        approx, detail = _dwt_single(approx, spec)
        details.append(detail)
    return [approx] + details[::-1]


def idwt(bands: Sequence[np.ndarray], spec: WaveletSpec, target_length: int) -> np.ndarray:
    """Reconstruct a length-``target_length`` signal from decomposition bands."""
    if len(bands) != spec.level + 1:
        raise ShapeError(f"expected {spec.level + 1} bands for level {spec.level}, got {len(bands)}")
    lengths = [target_length]
    for _ in range(spec.level):
        lengths.append(band_length(lengths[-1], spec.filter_length))
    approx = np.asarray(bands[0], dtype=np.float64)
    details = [np.asarray(b, dtype=np.float64) for b in bands[1:]]  # coarse to fine
    for j in range(spec.level, 0, -1):
        detail = details[spec.level - j]
        if approx.size != lengths[j] or detail.size != lengths[j]:
            raise ShapeError(
                f"level-{j} bands have lengths {approx.size}/{detail.size}, "
                f"expected {lengths[j]} for a length-{target_length} signal"
            )
        approx = _idwt_single(approx, detail, lengths[j - 1], spec)
    return approx


def soft_threshold(band: Sequence[float], tau: float) -> np.ndarray:
    """Shrink coefficients toward zero: |c| <= tau maps to 0, others lose tau."""
    if tau < 0:
        raise ConfigError(f"threshold must be non-negative, got {tau}")
    c = np.asarray(band, dtype=np.float64)
    return np.sign(c) * np.maximum(np.abs(c) - tau, 0.0)


def denoise(signal: Sequence[float], cfg: DenoiseConfig) -> np.ndarray:
    """Wavelet shrinkage: threshold all detail bands, keep the approximation.

    The threshold is cfg.threshold_scale times the population standard
    deviation of the selected detail band.
    """
    x = np.asarray(signal, dtype=np.float64)
    bands = dwt(x, cfg.wavelet)
    details = bands[1:]
    tau = cfg.threshold_scale * float(np.std(details[cfg.threshold_band]))
    shrunk = [soft_threshold(d, tau) for d in details]
    return idwt([bands[0]] + shrunk, cfg.wavelet, x.size)


def remove_baseline(signal: Sequence[float], kernel: int) -> np.ndarray:
    """Subtract the running median computed over a centered, edge-replicated window."""
    x = np.asarray(signal, dtype=np.float64)
    if kernel % 2 == 0 or kernel < 1:
        raise ConfigError(f"median kernel must be an odd positive integer, got {kernel}")
    if kernel > 2 * x.size - 1:
        raise ConfigError(
            f"median kernel {kernel} too large for signal of length {x.size} "
            f"(maximum {2 * x.size - 1})"
        )
    pad = (kernel - 1) // 2
    padded = np.pad(x, pad, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, kernel)
    baseline = np.median(windows, axis=-1)
    return x - baseline


def standardize(signal: Sequence[float], eps: float = 1e-8, clip_bound: float = 5.0) -> np.ndarray:
    """Center to zero mean, scale by population std (guarded by eps), then clip."""
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise ShapeError("cannot standardize an empty signal")
    scaled = (x - x.mean()) / (x.std() + eps)
    return np.clip(scaled, -clip_bound, clip_bound)


def preprocess_pipeline(signal: Signal, cfg: PreprocessConfig) -> Signal:
    """Denoise, remove baseline, standardize; label and source id are preserved."""
    x = denoise(signal.samples, cfg.denoise)
    x = remove_baseline(x, cfg.baseline_kernel)
    x = standardize(x, cfg.standardize_eps, cfg.clip_bound)
    return Signal(x, label=signal.label, source_id=signal.source_id)


def preprocess_dataset(dataset: Dataset, cfg: PreprocessConfig) -> Dataset:
    """Apply the conditioning pipeline to every signal of a dataset."""
    return Dataset(
        signals=[preprocess_pipeline(s, cfg) for s in dataset.signals],
        num_classes=dataset.num_classes,
        class_names=list(dataset.class_names),
        split=list(dataset.split),
    )
