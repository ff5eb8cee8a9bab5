"""Autograd engine: graph mechanics, primitive op gradients, AdamW."""
import numpy as np
import pytest

from concatnet.autograd import Tensor, matmul
from concatnet.errors import GraphError, NumericsError, OptimizerError
from concatnet.optim import AdamW, OptimizerConfig

from gradcheck import check_gradients


class TestGraph:
    def test_sum_gradient_is_ones(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_sum_of_squares_gradient(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x**2.0).sum().backward()
        np.testing.assert_allclose(x.grad, [2.0, 4.0], rtol=0, atol=1e-15)

    def test_backward_requires_scalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(GraphError):
            (x * x).backward()

    def test_backward_on_detached_scalar_fails(self):
        with pytest.raises(GraphError):
            Tensor(3.0).backward()

    def test_repeated_backward_accumulates(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        loss = (x**2.0).sum()
        loss.backward()
        loss.backward()
        np.testing.assert_allclose(x.grad, [4.0, 8.0])

    def test_shared_node_accumulates_through_both_paths(self):
        x = Tensor([3.0], requires_grad=True)
        y = x * x + x * x  # 2x^2 -> grad 4x
        y.sum().backward()
        np.testing.assert_allclose(x.grad, [12.0])

    def test_non_finite_data_rejected(self):
        with pytest.raises(NumericsError):
            Tensor([1.0, np.nan])
        with pytest.raises(NumericsError):
            Tensor([np.inf])

    def test_no_grad_tracking_without_requires_grad(self):
        x = Tensor([1.0, 2.0])
        out = x * x
        assert not out.requires_grad
        assert out._backward is None


class TestPrimitiveGradients:
    def test_add_mul_broadcast(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((1, 4))
        check_gradients(lambda ts: (ts[0] + ts[1]).sum(), [a, b])
        check_gradients(lambda ts: (ts[0] * ts[1]).sum(), [a, b])

    def test_matmul(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        check_gradients(lambda ts: matmul(ts[0], ts[1]).sum(), [a, b])

    def test_pow_and_mean(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((5,)) + 3.0  # keep base positive for pow 1.5
        check_gradients(lambda ts: (ts[0] ** 1.5).mean(), [a])


class TestAdamW:
    def _single_param_optimizer(self, value, decay=True, **cfg_kwargs):
        p = Tensor(np.array([value]), requires_grad=True)
        opt = AdamW([("p", p, decay)], OptimizerConfig(**cfg_kwargs))
        return p, opt

    def test_decay_alone_shrinks_parameter(self):
        p, opt = self._single_param_optimizer(1.0, weight_decay=0.01, learning_rate=1e-3)
        p.grad = np.zeros(1)
        opt.step()
        np.testing.assert_allclose(p.data, [0.99999], rtol=0, atol=1e-15)

    def test_no_decay_no_grad_leaves_parameter(self):
        p, opt = self._single_param_optimizer(1.0, weight_decay=0.0)
        p.grad = np.zeros(1)
        opt.step()
        np.testing.assert_array_equal(p.data, [1.0])

    def test_decay_exempt_parameter_is_never_decayed(self):
        p, opt = self._single_param_optimizer(1.0, decay=False, weight_decay=0.01)
        p.grad = np.zeros(1)
        opt.step()
        np.testing.assert_array_equal(p.data, [1.0])

    def test_first_step_is_bias_corrected(self):
        p, opt = self._single_param_optimizer(0.0, weight_decay=0.0, learning_rate=1e-3)
        p.grad = np.ones(1)
        opt.step()
        np.testing.assert_allclose(p.data, [-1e-3], rtol=0, atol=1e-10)

    def test_missing_gradient_raises(self):
        p, opt = self._single_param_optimizer(1.0)
        with pytest.raises(OptimizerError):
            opt.step()

    def test_non_finite_gradient_raises(self):
        p, opt = self._single_param_optimizer(1.0)
        p.grad = np.array([np.nan])
        with pytest.raises(NumericsError):
            opt.step()

    def test_decay_disabled_matches_plain_adam_reference(self):
        # reference Adam implemented independently below
        rng = np.random.default_rng(7)
        start = rng.standard_normal(6)
        p, opt = self._single_param_optimizer(0.0, weight_decay=0.0, learning_rate=1e-2)
        p.data = start.copy()
        opt._m["p"] = np.zeros(6)
        opt._v["p"] = np.zeros(6)

        ref = start.copy()
        m = np.zeros(6)
        v = np.zeros(6)
        beta1, beta2, eps, lr = 0.9, 0.999, 1e-8, 1e-2
        for t in range(1, 11):
            g = rng.standard_normal(6)
            p.grad = g.copy()
            opt.step()
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            mhat = m / (1 - beta1**t)
            vhat = v / (1 - beta2**t)
            ref -= lr * mhat / (np.sqrt(vhat) + eps)
            p.grad = None
        np.testing.assert_allclose(p.data, ref, rtol=0, atol=1e-12)

    def test_zero_grad_clears_all(self):
        p, opt = self._single_param_optimizer(1.0)
        p.grad = np.ones(1)
        opt.zero_grad()
        assert p.grad is None
