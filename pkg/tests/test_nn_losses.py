"""Loss heads: frozen hand values, saturation behavior, gradient checks."""
import numpy as np

from stressseq.nn.losses import bce_with_logits, kl_bernoulli, kl_bernoulli_from_logits, mse


class TestBce:
    def test_logit_zero_label_one_is_ln_two(self):
        loss, _ = bce_with_logits(np.array([0.0]), np.array([1.0]))
        np.testing.assert_allclose(loss, np.log(2.0), atol=1e-12)

    def test_saturated_logit_has_tiny_loss_without_overflow(self):
        loss, grad = bce_with_logits(np.array([20.0]), np.array([1.0]))
        assert loss < 1e-8
        assert np.isfinite(grad).all()
        loss_neg, _ = bce_with_logits(np.array([-800.0]), np.array([0.0]))
        assert np.isfinite(loss_neg) and loss_neg < 1e-8

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        logits = rng.standard_normal(8) * 2
        labels = (rng.random(8) < 0.5).astype(float)
        _, grad = bce_with_logits(logits, labels)
        h = 1e-6
        for i in range(8):
            up = logits.copy()
            up[i] += h
            down = logits.copy()
            down[i] -= h
            numeric = (bce_with_logits(up, labels)[0] - bce_with_logits(down, labels)[0]) / (2 * h)
            assert abs(numeric - grad[i]) < 1e-7 + 1e-4 * abs(numeric)


class TestKlBernoulli:
    def test_zero_when_target_equals_prediction(self):
        p = np.array([0.3, 0.7, 0.5])
        logits = np.log(p / (1 - p))
        loss, _ = kl_bernoulli_from_logits(p, logits)
        np.testing.assert_allclose(loss, 0.0, atol=1e-12)
        assert kl_bernoulli(p, p) == 0.0

    def test_hand_value_half_to_three_quarters(self):
        # KL(0.5 || 0.75) = 0.5 ln(2/3) + 0.5 ln(2) = 0.5 ln(4/3)
        expected = 0.5 * np.log(2.0 / 3.0) + 0.5 * np.log(2.0)
        q = 0.75
        logits = np.array([np.log(q / (1 - q))])
        loss, _ = kl_bernoulli_from_logits(np.array([0.5]), logits)
        np.testing.assert_allclose(loss, expected, atol=1e-12)
        np.testing.assert_allclose(loss, 0.14384, atol=5e-6)
        np.testing.assert_allclose(kl_bernoulli([0.5], [0.75]), expected, atol=1e-12)

    def test_non_negative_under_fuzzing(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = rng.uniform(0.001, 0.999, size=5)
            q = rng.uniform(0.001, 0.999, size=5)
            assert kl_bernoulli(p, q) >= 0.0
            loss, _ = kl_bernoulli_from_logits(p, np.log(q / (1 - q)))
            assert loss >= 0.0

    def test_gradient_flows_only_into_logits(self):
        rng = np.random.default_rng(2)
        p = rng.uniform(0.1, 0.9, size=6)
        logits = rng.standard_normal(6)
        _, grad = kl_bernoulli_from_logits(p, logits)
        h = 1e-6
        for i in range(6):
            up = logits.copy()
            up[i] += h
            down = logits.copy()
            down[i] -= h
            numeric = (
                kl_bernoulli_from_logits(p, up)[0] - kl_bernoulli_from_logits(p, down)[0]
            ) / (2 * h)
            assert abs(numeric - grad[i]) < 1e-7 + 1e-4 * abs(numeric)


class TestMse:
    def test_equal_tensors_give_zero(self):
        x = np.random.default_rng(3).standard_normal((2, 3, 4))
        loss, grad = mse(x, x.copy())
        assert loss == 0.0
        np.testing.assert_array_equal(grad, np.zeros_like(x))

    def test_zeros_versus_ones_is_one(self):
        loss, _ = mse(np.zeros((2, 5, 3)), np.ones((2, 5, 3)))
        assert loss == 1.0

    def test_matches_brute_force_elementwise_mean(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            shape = (rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 4))
            x = rng.standard_normal(shape)
            x_hat = rng.standard_normal(shape)
            total = 0.0
            for index in np.ndindex(*shape):
                total += (x[index] - x_hat[index]) ** 2
            expected = total / np.prod(shape)
            loss, _ = mse(x, x_hat)
            np.testing.assert_allclose(loss, expected, atol=1e-12)
