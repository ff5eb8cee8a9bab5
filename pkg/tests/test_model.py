"""Network assembly: parameter counts, block semantics, attention gating,
forward shapes, gradient flow, and checkpoint round trips."""
import numpy as np
import pytest

from concatnet.autograd import Tensor
from concatnet.errors import DataFormatError, ShapeError
from concatnet.model import Model, ModelConfig, ResNetBlock, load_model, save_model
from concatnet.nn import LossConfig, focal_loss, maxpool1d, relu, softmax_np


def closed_form_param_count(cfg: ModelConfig) -> int:
    """Independent arithmetic over the architecture, no model walking."""
    def conv(c_in, c_out, k):
        return c_out * c_in * k + c_out

    def bn(c):
        return 2 * c

    def dense(f_in, f_out):
        return f_out * f_in + f_out

    total = conv(cfg.in_channels, cfg.stem_channels, cfg.stem_kernel) + bn(cfg.stem_channels)
    c_in = cfg.stem_channels
    for c_out, blocks, first_stride in cfg.layers:
        for b in range(blocks):
            stride = first_stride if b == 0 else 1
            total += conv(c_in, c_out, cfg.block_kernel) + bn(c_out)
            total += conv(c_out, c_out, cfg.block_kernel) + bn(c_out)
            if stride != 1 or c_in != c_out:
                total += conv(c_in, c_out, 1) + bn(c_out)
            c_in = c_out
    width = cfg.feature_width
    bottleneck = width // cfg.attention_divisor
    total += dense(width, bottleneck) + dense(bottleneck, width)
    total += dense(width, cfg.classifier_hidden) + dense(cfg.classifier_hidden, cfg.num_classes)
    return total


def small_config(num_classes=2):
    return ModelConfig(
        num_classes=num_classes,
        stem_channels=8,
        stem_kernel=7,
        stem_padding=3,
        layers=((16, 1, 2), (16, 1, 2), (16, 1, 1)),
        attention_divisor=8,
        classifier_hidden=8,
        classifier_dropout=0.0,
    )


class TestParameterCount:
    def test_default_config_lands_near_6_4_million(self):
        model = Model(ModelConfig(num_classes=2), seed=0)
        count = model.parameter_count()
        assert 6_000_000 <= count <= 6_800_000
        assert count == closed_form_param_count(ModelConfig(num_classes=2))

    def test_closed_form_matches_walk_over_random_configs(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            widths = sorted(rng.choice([8, 16, 24, 32, 40, 48], size=3, replace=False))
            cfg = ModelConfig(
                num_classes=int(rng.integers(2, 6)),
                stem_channels=int(rng.choice([4, 8, 16])),
                stem_kernel=int(rng.choice([7, 15])),
                stem_padding=7,
                layers=tuple(
                    (int(w), int(rng.integers(1, 3)), int(rng.choice([1, 2])))
                    for w in widths
                ),
                block_kernel=int(rng.choice([3, 5])),
                attention_divisor=8,
                classifier_hidden=int(rng.choice([8, 16, 32])),
            )
            model = Model(cfg, seed=1)
            assert model.parameter_count() == closed_form_param_count(cfg)

    def test_same_seed_bit_identical_parameters(self):
        a = Model(small_config(), seed=5)
        b = Model(small_config(), seed=5)
        for (name_a, pa, _), (name_b, pb, _) in zip(a.named_parameters(), b.named_parameters()):
            assert name_a == name_b
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_parameter_names_unique(self):
        names = [name for name, _, _ in Model(small_config(), seed=0).named_parameters()]
        assert len(names) == len(set(names))


class TestResNetBlock:
    def _identity_bn(self, bn):
        bn.gamma.data[...] = 1.0
        bn.beta.data[...] = 0.0
        bn.running_mean[...] = 0.0
        bn.running_var[...] = 1.0

    def test_zero_main_path_passes_relu_of_input(self):
        rng = np.random.default_rng(2)
        block = ResNetBlock(4, 4, stride=1, kernel=5, padding=2, rng=rng)
        for conv in (block.conv1, block.conv2):
            conv.weight.data[...] = 0.0
            conv.bias.data[...] = 0.0
        self._identity_bn(block.bn1)
        self._identity_bn(block.bn2)
        x = rng.standard_normal((2, 4, 10))
        out = block.forward(Tensor(x), training=False)
        eps_scale = 1.0 / np.sqrt(1.0 + 1e-5)  # bn eval divides by sqrt(1+eps)
        np.testing.assert_allclose(out.data, np.maximum(x, 0.0), atol=1e-4)
        assert np.allclose(out.data, np.maximum(x, 0.0) * 1.0, atol=1e-4) or eps_scale < 1

    def test_stride_two_halves_length(self):
        rng = np.random.default_rng(3)
        block = ResNetBlock(4, 8, stride=2, kernel=5, padding=2, rng=rng)
        out = block.forward(Tensor(rng.standard_normal((1, 4, 20))), training=False)
        assert out.shape == (1, 8, (20 + 4 - 5) // 2 + 1)

    def test_output_is_non_negative(self):
        rng = np.random.default_rng(4)
        block = ResNetBlock(4, 4, stride=1, kernel=5, padding=2, rng=rng)
        out = block.forward(Tensor(rng.standard_normal((2, 4, 16))), training=False)
        assert (out.data >= 0).all()

    def test_downsample_present_only_when_needed(self):
        rng = np.random.default_rng(5)
        assert ResNetBlock(4, 4, 1, 5, 2, rng).downsample_conv is None
        assert ResNetBlock(4, 8, 1, 5, 2, rng).downsample_conv is not None
        assert ResNetBlock(4, 4, 2, 5, 2, rng).downsample_conv is not None


class TestAttention:
    def test_zero_weights_halve_features(self):
        model = Model(small_config(), seed=6)
        for layer in (model.attention_fc1, model.attention_fc2):
            layer.weight.data[...] = 0.0
            layer.bias.data[...] = 0.0
        z = np.random.default_rng(7).standard_normal((3, 16))
        out = model.attention(Tensor(z))
        np.testing.assert_allclose(out.data, z / 2.0, atol=1e-15)

    def test_gating_never_amplifies(self):
        model = Model(small_config(), seed=8)
        z = np.random.default_rng(9).standard_normal((4, 16)) * 3
        out = model.attention(Tensor(z))
        assert (np.abs(out.data) <= np.abs(z)).all()

    def test_zero_input_stays_zero(self):
        model = Model(small_config(), seed=10)
        out = model.attention(Tensor(np.zeros((2, 16))))
        np.testing.assert_array_equal(out.data, np.zeros((2, 16)))


class TestForward:
    def test_default_shapes_and_softmax_rows(self):
        model = Model(ModelConfig(num_classes=2), seed=11).eval_mode()
        x = np.random.default_rng(12).standard_normal((4, 1, 1246))
        logits = model.forward(Tensor(x))
        assert logits.shape == (4, 2)
        rows = softmax_np(logits.data).sum(axis=1)
        np.testing.assert_allclose(rows, np.ones(4), atol=1e-12)

    def test_eval_forward_is_bit_deterministic(self):
        model = Model(small_config(), seed=13).eval_mode()
        x = np.random.default_rng(14).standard_normal((2, 1, 64))
        a = model.forward(Tensor(x)).data
        b = model.forward(Tensor(x)).data
        np.testing.assert_array_equal(a, b)

    def test_intermediate_lengths_in_describe(self):
        model = Model(ModelConfig(num_classes=2), seed=15)
        table = model.describe(1246)
        for token in ("623", "312", "156", "78", "39", "6405698"):
            assert token in table

    def test_too_short_input_names_stage(self):
        model = Model(ModelConfig(num_classes=2), seed=16).eval_mode()
        with pytest.raises(ShapeError, match="layer|maxpool|stem"):
            model.forward(Tensor(np.zeros((1, 1, 8))))

    def test_gradient_reaches_nearly_all_parameters(self):
        model = Model(small_config(), seed=17).train_mode()
        rng = np.random.default_rng(18)
        x = rng.standard_normal((4, 1, 64))
        logits = model.forward(Tensor(x), rng=rng)
        loss = focal_loss(logits, np.array([0, 1, 0, 1]), LossConfig())
        loss.backward()
        params = model.named_parameters()
        assert all(p.grad is not None for _, p, _ in params)
        nonzero = sum((p.grad != 0).any() for _, p, _ in params)
        assert nonzero / len(params) >= 0.99

    def test_skip_only_network_matches_reference_composition(self):
        model = Model(small_config(), seed=19).eval_mode()
        for _, block in [(n, b) for stage in model.stages for n, b in enumerate(stage)]:
            for conv in (block.conv1, block.conv2):
                conv.weight.data[...] = 0.0
                conv.bias.data[...] = 0.0
            for bn in (block.bn1, block.bn2, block.downsample_bn):
                if bn is None:
                    continue
                bn.gamma.data[...] = 1.0
                bn.beta.data[...] = 0.0
                bn.running_mean[...] = 0.0
                bn.running_var[...] = 1.0 - 1e-5  # cancel the eps in sqrt(var+eps)

        x = np.random.default_rng(20).standard_normal((2, 1, 64))
        stem = relu(model.stem_bn(model.stem_conv(Tensor(x)), training=False))
        pooled = maxpool1d(stem, model.cfg.pool_kernel, model.cfg.pool_stride,
                           model.cfg.pool_padding)
        reference = pooled
        for stage in model.stages:
            for block in stage:
                if block.downsample_conv is not None:
                    reference = block.downsample_bn(
                        block.downsample_conv(reference), training=False
                    )
                reference = relu(reference)

        actual = pooled
        for stage in model.stages:
            for block in stage:
                actual = block.forward(actual, training=False)
        np.testing.assert_allclose(actual.data, reference.data, atol=1e-10)


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        model = Model(small_config(), seed=21).eval_mode()
        # move running stats off their initial values
        x = np.random.default_rng(22).standard_normal((4, 1, 64))
        model.train_mode()
        model.forward(Tensor(x), rng=np.random.default_rng(23))
        model.eval_mode()

        path = tmp_path / "model.ckpt"
        save_model(path, model, {"note": "test"})
        restored, config = load_model(path)
        assert config["note"] == "test"
        for (name_a, pa, _), (name_b, pb, _) in zip(
            model.named_parameters(), restored.named_parameters()
        ):
            assert name_a == name_b
            np.testing.assert_array_equal(pa.data, pb.data)
        for (name_a, ba), (name_b, bb) in zip(model.named_buffers(), restored.named_buffers()):
            assert name_a == name_b
            np.testing.assert_array_equal(ba, bb)
        probe = np.random.default_rng(24).standard_normal((2, 1, 64))
        np.testing.assert_array_equal(
            model.forward(Tensor(probe)).data, restored.forward(Tensor(probe)).data
        )

    def test_corrupt_file_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(DataFormatError):
            load_model(path)
