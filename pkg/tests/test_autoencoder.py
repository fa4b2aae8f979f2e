"""Autoencoder reconstruction, pretraining behavior, and encoder transplant."""
import numpy as np
import pytest

from stressseq.autoencoder import (
    AePretrainSpec,
    ae_loss,
    init_autoencoder,
    pretrain,
    transplant,
)
from stressseq.nn.model import NetworkSpec, init_classifier

SMALL = NetworkSpec(
    input_dim=3,
    lstm_units=(4, 4),
    lstm_dropout=0.0,
    lstm_recurrent_dropout=0.0,
    use_batchnorm=False,
    dense_hidden=8,
    dense_dropout=0.0,
)


class TestAeLoss:
    def test_identical_tensors_give_zero(self):
        x = np.random.default_rng(0).standard_normal((2, 5, 3))
        assert ae_loss(x, x.copy()) == 0.0

    def test_zeros_versus_ones_is_one(self):
        assert ae_loss(np.zeros((3, 4, 2)), np.ones((3, 4, 2))) == 1.0

    def test_matches_brute_force_on_random_tensors(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            shape = (int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(1, 4)))
            x, x_hat = rng.standard_normal(shape), rng.standard_normal(shape)
            brute = sum(
                (x[i] - x_hat[i]) ** 2 for i in np.ndindex(*shape)
            ) / np.prod(shape)
            np.testing.assert_allclose(ae_loss(x, x_hat), brute, atol=1e-12)


class TestForward:
    def test_untrained_forward_is_finite(self):
        ae = init_autoencoder(SMALL, seed=0)
        x = np.random.default_rng(2).standard_normal((4, 6, 3))
        x_hat, latents, _ = ae.forward(x)
        assert np.all(np.isfinite(x_hat)) and np.all(np.isfinite(latents))
        assert np.isfinite(ae_loss(x, x_hat))

    def test_single_cell_hand_trace(self):
        # B=T=F=H=1: both LSTMs and the projection reduce to scalar formulas.
        spec = NetworkSpec(
            input_dim=1, lstm_units=(1,), lstm_dropout=0.0,
            lstm_recurrent_dropout=0.0, use_batchnorm=False,
            dense_hidden=1, dense_dropout=0.0,
        )
        ae = init_autoencoder(spec, seed=0)
        w_enc = np.array([[0.5], [0.2], [0.3], [-0.4]])
        w_dec = np.array([[-0.1], [0.6], [0.2], [0.7]])
        b_enc = np.array([0.05, 0.1, -0.05, 0.2])
        b_dec = np.array([0.1, -0.2, 0.3, 0.0])
        ae.params["enc0.W"] = w_enc.copy()
        ae.params["enc0.b"] = b_enc.copy()
        ae.params["dec0.W"] = w_dec.copy()
        ae.params["dec0.b"] = b_dec.copy()
        ae.params["proj.W"] = np.array([[1.5]])
        ae.params["proj.b"] = np.array([0.25])

        x_value = 0.8
        x = np.array([[[x_value]]])
        x_hat, latents, _ = ae.forward(x)

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        def lstm_step(w, b, value):
            i = sig(w[0, 0] * value + b[0])
            f = sig(w[1, 0] * value + b[1])
            g = np.tanh(w[2, 0] * value + b[2])
            o = sig(w[3, 0] * value + b[3])
            c = i * g
            return o * np.tanh(c)

        latent = lstm_step(w_enc, b_enc, x_value)
        decoded = lstm_step(w_dec, b_dec, latent)
        expected = 1.5 * decoded + 0.25
        np.testing.assert_allclose(latents[0, 0], latent, atol=1e-12)
        np.testing.assert_allclose(x_hat[0, 0, 0], expected, atol=1e-12)

    def test_latents_equal_for_identical_inputs_without_noise(self):
        ae = init_autoencoder(SMALL, seed=1)
        x = np.random.default_rng(3).standard_normal((1, 5, 3))
        both = np.concatenate([x, x])
        _, latents, _ = ae.forward(both)
        np.testing.assert_array_equal(latents[0], latents[1])

    def test_dimension_mismatch_raises(self):
        ae = init_autoencoder(SMALL, seed=0)
        with pytest.raises(ValueError):
            ae.forward(np.zeros((2, 5, 7)))

    def test_backward_matches_finite_differences(self, fd_check):
        ae = init_autoencoder(SMALL, seed=4)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 4, 3))
        weight = rng.standard_normal((2, 4, 3))

        def loss():
            x_hat, _, _ = ae.forward(x)
            return float(np.sum(x_hat * weight))

        _, _, cache = ae.forward(x)
        grads = ae.backward(cache, weight)
        fd_check(loss, ae.params, grads, rng, n_points=4)

    def test_reverse_decode_flips_time(self):
        ae = init_autoencoder(SMALL, seed=6)
        flipped = init_autoencoder(SMALL, seed=6, reverse_decode=True)
        x = np.random.default_rng(7).standard_normal((2, 5, 3))
        a, _, _ = ae.forward(x)
        b, _, _ = flipped.forward(x)
        np.testing.assert_array_equal(b, a[:, ::-1, :])


class TestPretrain:
    def test_constant_windows_fit_below_threshold(self):
        windows = np.full((24, 6, 3), 0.37)
        spec = AePretrainSpec(noise_sigma=0.0, epochs=50, batch_size=8, learning_rate=3e-2)
        _, curve = pretrain(windows, spec, SMALL, seed=0)
        assert curve[-1][1] < 1e-3

    def test_holdout_loss_improves_over_first_epoch(self):
        rng = np.random.default_rng(8)
        base = rng.standard_normal((40, 1, 3))
        windows = np.repeat(base, 6, axis=1) + 0.05 * rng.standard_normal((40, 6, 3))
        spec = AePretrainSpec(noise_sigma=0.02, epochs=30, batch_size=8, learning_rate=1e-2)
        _, curve = pretrain(windows, spec, SMALL, seed=1)
        assert curve[-1][2] < curve[0][2]

    def test_identical_seeds_give_identical_curves(self):
        rng = np.random.default_rng(9)
        windows = rng.standard_normal((20, 5, 3))
        spec = AePretrainSpec(epochs=5, batch_size=8, learning_rate=1e-2)
        _, curve_a = pretrain(windows, spec, SMALL, seed=3)
        _, curve_b = pretrain(windows, spec, SMALL, seed=3)
        assert curve_a == curve_b


class TestTransplant:
    def test_lstm_weights_byte_identical_after_transplant(self):
        ae = init_autoencoder(SMALL, seed=10)
        model = transplant(ae, SMALL, seed=11)
        for li in range(2):
            for part in ("W", "U", "b"):
                assert (
                    model.params[f"lstm{li}.{part}"].tobytes()
                    == ae.params[f"enc{li}.{part}"].tobytes()
                )

    def test_transplanted_classifier_reproduces_encoder_state(self):
        ae = init_autoencoder(SMALL, seed=12)
        model = transplant(ae, SMALL, seed=13)
        x = np.random.default_rng(14).standard_normal((3, 6, 3))
        latents = ae.encode(x)
        _, cache = model.forward(x, mode="eval")
        np.testing.assert_allclose(cache["last_hidden"], latents, atol=1e-12)

    def test_transplant_is_idempotent(self):
        ae = init_autoencoder(SMALL, seed=15)
        once = transplant(ae, SMALL, seed=16)
        twice = transplant(ae, SMALL, seed=16)
        for name in once.params:
            np.testing.assert_array_equal(once.params[name], twice.params[name])

    def test_head_parameters_are_freshly_initialized(self):
        ae = init_autoencoder(SMALL, seed=17)
        model = transplant(ae, SMALL, seed=18)
        fresh = init_classifier(SMALL, seed=18)
        np.testing.assert_array_equal(model.params["dense.W"], fresh.params["dense.W"])
        np.testing.assert_array_equal(model.params["head.W"], fresh.params["head.W"])

    def test_mismatched_hidden_dim_raises(self):
        ae = init_autoencoder(SMALL, seed=19)
        wider = NetworkSpec(
            input_dim=3, lstm_units=(8, 8), use_batchnorm=False,
            dense_hidden=8, lstm_dropout=0.0, lstm_recurrent_dropout=0.0,
            dense_dropout=0.0,
        )
        with pytest.raises(ValueError, match="lstm0"):
            transplant(ae, wider, seed=20)

    def test_layer_count_mismatch_raises(self):
        ae = init_autoencoder(SMALL, seed=21)
        deeper = NetworkSpec(
            input_dim=3, lstm_units=(4, 4, 4), use_batchnorm=False,
            dense_hidden=8, lstm_dropout=0.0, lstm_recurrent_dropout=0.0,
            dense_dropout=0.0,
        )
        with pytest.raises(ValueError, match="layers"):
            transplant(ae, deeper, seed=22)
