"""Wavelet transform, shrinkage, median baseline removal, standardization."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concatnet.errors import ConfigError, ShapeError
from concatnet.preprocess import (
    DB4_LOWPASS,
    DenoiseConfig,
    PreprocessConfig,
    WaveletSpec,
    band_length,
    denoise,
    dwt,
    idwt,
    max_level,
    preprocess_pipeline,
    remove_baseline,
    soft_threshold,
    standardize,
)
from concatnet.signal_io import Signal


def _median_oracle(x, kernel):
    """Per-window sort-and-pick-middle with index-clamped (replicated) edges."""
    n = len(x)
    pad = (kernel - 1) // 2
    out = []
    for i in range(n):
        window = sorted(x[min(max(j, 0), n - 1)] for j in range(i - pad, i + pad + 1))
        out.append(window[kernel // 2])
    return np.array(out)


class TestFilterBank:
    def test_lowpass_sums_to_sqrt2(self):
        assert abs(sum(DB4_LOWPASS) - math.sqrt(2.0)) < 1e-12

    def test_highpass_sums_to_zero(self):
        spec = WaveletSpec()
        assert abs(spec.highpass.sum()) < 1e-12

    def test_double_shift_orthonormality(self):
        # sum_k h[k] h[k+2m] must be 1 at m=0 and 0 otherwise
        h = np.array(DB4_LOWPASS)
        for m in range(4):
            inner = sum(h[k] * h[k + 2 * m] for k in range(len(h) - 2 * m))
            expected = 1.0 if m == 0 else 0.0
            assert abs(inner - expected) < 1e-12

    def test_quadrature_mirror_enforced(self):
        with pytest.raises(ConfigError):
            WaveletSpec(highpass=np.ones(8))


class TestDwtIdwt:
    def test_constant_signal_has_vanishing_details(self):
        bands = dwt(np.full(64, 3.0), WaveletSpec(level=4))
        for detail in bands[1:]:
            assert np.abs(detail).max() < 1e-10
        # the approximation alone reconstructs the constant
        zeroed = [bands[0]] + [np.zeros_like(d) for d in bands[1:]]
        rec = idwt(zeroed, WaveletSpec(level=4), 64)
        np.testing.assert_allclose(rec, np.full(64, 3.0), atol=1e-10)

    def test_perfect_reconstruction_length_178(self):
        rng = np.random.default_rng(0)
        spec = WaveletSpec(level=4)
        for _ in range(20):
            x = rng.standard_normal(178)
            rec = idwt(dwt(x, spec), spec, 178)
            assert np.abs(rec - x).max() < 1e-8

    def test_linear_ramp_interior_details_vanish(self):
        # four vanishing moments annihilate polynomials away from the boundary
        bands = dwt(np.arange(64, dtype=float), WaveletSpec(level=1))
        interior = bands[1][4:-4]
        assert np.abs(interior).max() < 1e-8

    def test_band_lengths_follow_recurrence(self):
        spec = WaveletSpec(level=4)
        bands = dwt(np.zeros(178), spec)
        lengths = [178]
        for _ in range(4):
            lengths.append(band_length(lengths[-1], 8))
        # [cA_4, cD_4, cD_3, cD_2, cD_1]
        assert [b.size for b in bands] == [lengths[4], lengths[4], lengths[3], lengths[2], lengths[1]]
        assert sum(b.size for b in bands) >= 178

    def test_too_short_for_level_reports_max(self):
        with pytest.raises(ShapeError, match="at most level"):
            dwt(np.zeros(16), WaveletSpec(level=8))
        # every decomposition stage must see a full filter's worth of input
        assert max_level(16, 8) == 4
        assert max_level(7, 8) == 0

    def test_zero_bands_give_zero_signal(self):
        spec = WaveletSpec(level=2)
        bands = dwt(np.zeros(32), spec)
        rec = idwt([np.zeros_like(b) for b in bands], spec, 32)
        np.testing.assert_array_equal(rec, np.zeros(32))

    def test_inconsistent_bands_rejected(self):
        spec = WaveletSpec(level=2)
        bands = dwt(np.random.default_rng(1).standard_normal(64), spec)
        bands[1] = bands[1][:-2]
        with pytest.raises(ShapeError):
            idwt(bands, spec, 64)

    def test_detail_zeroing_matches_lowpass_reconstruction_oracle(self):
        # reconstructing with zeroed details equals running the approximation
        # back up through the synthesis lowpass chain only
        rng = np.random.default_rng(2)
        spec = WaveletSpec(level=3)
        x = rng.standard_normal(96)
        bands = dwt(x, spec)
        smoothed = idwt(
            [bands[0]] + [np.zeros_like(d) for d in bands[1:]], spec, 96
        )
        assert smoothed.size == 96
        # oracle: synthesis with only the lowpass branch, level by level
        lengths = [96]
        for _ in range(3):
            lengths.append(band_length(lengths[-1], 8))
        approx = bands[0]
        for level in range(3, 0, -1):
            up = np.zeros(2 * approx.size - 1)
            up[::2] = approx
            full = np.convolve(up, spec.lowpass, mode="full")
            first = (full.size - lengths[level - 1]) // 2
            approx = full[first : first + lengths[level - 1]]
        np.testing.assert_allclose(smoothed, approx, atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(
        length=st.integers(min_value=16, max_value=300),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_perfect_reconstruction_property(self, length, seed):
        spec = WaveletSpec(level=min(4, max_level(length, 8)))
        x = np.random.default_rng(seed).standard_normal(length) * 10
        rec = idwt(dwt(x, spec), spec, length)
        assert np.abs(rec - x).max() < 1e-8


class TestSoftThreshold:
    def test_hand_example(self):
        np.testing.assert_allclose(soft_threshold([3.0, -3.0, 0.5], 1.0), [2.0, -2.0, 0.0])

    def test_zero_threshold_is_identity(self):
        x = np.random.default_rng(3).standard_normal(40)
        np.testing.assert_array_equal(soft_threshold(x, 0.0), x)

    def test_zeros_are_fixed_point(self):
        np.testing.assert_array_equal(soft_threshold(np.zeros(10), 2.5), np.zeros(10))

    @settings(max_examples=100, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=50
        ),
        tau=st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
    )
    def test_contraction_and_sign(self, values, tau):
        x = np.array(values)
        out = soft_threshold(x, tau)
        assert (np.abs(out) <= np.abs(x) + 1e-15).all()
        assert ((np.sign(out) == np.sign(x)) | (out == 0.0)).all()


class TestDenoise:
    def test_constant_signal_unchanged(self):
        x = np.full(64, 3.0)
        np.testing.assert_allclose(denoise(x, DenoiseConfig()), x, atol=1e-8)

    def test_zero_signal_unchanged(self):
        np.testing.assert_allclose(denoise(np.zeros(64), DenoiseConfig()), np.zeros(64), atol=1e-12)

    def test_monte_carlo_noise_reduction(self):
        # sine of amplitude 1 plus noise; shrinkage must lower the RMSE
        n = 256
        clean = np.sin(2 * np.pi * 4 * np.arange(n) / n)
        cfg = DenoiseConfig()
        for seed in range(100):
            noisy = clean + np.random.default_rng(seed).normal(0.0, 0.1, n)
            den = denoise(noisy, cfg)
            rmse_before = np.sqrt(np.mean((noisy - clean) ** 2))
            rmse_after = np.sqrt(np.mean((den - clean) ** 2))
            assert rmse_after < rmse_before

    def test_output_length_preserved(self):
        x = np.random.default_rng(4).standard_normal(178)
        assert denoise(x, DenoiseConfig()).size == 178


class TestRemoveBaseline:
    def test_hand_median_example(self):
        out = remove_baseline([1.0, 100.0, 1.0], 3)
        np.testing.assert_array_equal(out, [0.0, 99.0, 0.0])

    def test_constant_signal_gives_zero(self):
        np.testing.assert_array_equal(remove_baseline(np.full(20, 7.0), 5), np.zeros(20))

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            remove_baseline(np.zeros(10), 4)

    def test_kernel_too_large_rejected(self):
        with pytest.raises(ConfigError):
            remove_baseline(np.zeros(10), 21)

    def test_signal_shorter_than_kernel_still_defined(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(26)  # kernel 51 needs length >= 26
        out = remove_baseline(x, 51)
        np.testing.assert_allclose(out, x - _median_oracle(x, 51), atol=1e-15)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        for length in range(2, 65, 3):
            x = rng.standard_normal(length)
            for kernel in (3, 5, 51):
                kernel = min(kernel, 2 * length - 1)
                if kernel % 2 == 0:
                    kernel -= 1
                baseline = x - remove_baseline(x, kernel)
                np.testing.assert_allclose(baseline, _median_oracle(x, kernel), atol=1e-15)


class TestStandardize:
    def test_three_point_example(self):
        out = standardize([1.0, 2.0, 3.0])
        expected = 1.0 / math.sqrt(2.0 / 3.0)
        np.testing.assert_allclose(out, [-expected, 0.0, expected], atol=1e-7)

    def test_constant_signal_maps_to_zeros(self):
        np.testing.assert_array_equal(standardize(np.full(10, 4.5)), np.zeros(10))
        # non-representable constants pick up float round-off in the mean;
        # the eps guard keeps the output negligible rather than exactly zero
        assert np.abs(standardize(np.full(10, 4.2))).max() < 1e-6

    def test_outliers_clip_at_bound(self):
        x = np.zeros(100)
        x[-1] = 10.0
        out = standardize(x)
        assert out.max() == 5.0
        assert (np.abs(out) <= 5.0).all()

    @settings(max_examples=100, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**31),
        gain=st.floats(min_value=0.5, max_value=2.0),
        offset=st.floats(min_value=-100.0, max_value=100.0),
    )
    def test_affine_invariance(self, seed, gain, offset):
        # the eps guard perturbs the output by about 5*eps*|1-a|/(a*sigma),
        # so keep sigma large enough for the 1e-10 bound to be meaningful
        x = np.random.default_rng(seed).standard_normal(64) * 1e4
        base = standardize(x)
        transformed = standardize(gain * x + offset)
        np.testing.assert_allclose(transformed, base, rtol=0, atol=1e-10)


class TestPipeline:
    def test_zero_signal_with_label(self):
        sig = Signal(np.zeros(64), label=1, source_id="z")
        out = preprocess_pipeline(sig, PreprocessConfig())
        np.testing.assert_allclose(out.samples, np.zeros(64), atol=1e-12)
        assert out.label == 1
        assert out.source_id == "z"

    def test_output_within_clip_bound(self):
        rng = np.random.default_rng(7)
        cfg = PreprocessConfig()
        for scale in (1.0, 100.0, 1e6):
            sig = Signal(rng.standard_normal(178) * scale)
            out = preprocess_pipeline(sig, cfg)
            assert (np.abs(out.samples) <= cfg.clip_bound).all()

    def test_stage_order_is_denoise_baseline_standardize(self):
        rng = np.random.default_rng(8)
        cfg = PreprocessConfig(baseline_kernel=11)
        x = rng.standard_normal(96) + 40.0
        sig = Signal(x)
        expected = standardize(
            remove_baseline(denoise(x, cfg.denoise), cfg.baseline_kernel),
            cfg.standardize_eps,
            cfg.clip_bound,
        )
        np.testing.assert_array_equal(preprocess_pipeline(sig, cfg).samples, expected)

    def test_even_baseline_kernel_rejected_in_config(self):
        with pytest.raises(ConfigError):
            PreprocessConfig(baseline_kernel=50)
