"""Sequence-to-sequence LSTM autoencoder for unlabeled pretraining.

The encoder mirrors the classifier's LSTM stack; its final top-layer hidden
state is the latent vector. The decoder receives that latent repeated at
every timestep, runs the mirrored stack, and projects each step back to the
feature dimension. Pretraining minimizes mean squared reconstruction error
of the clean input while Gaussian noise is added to the encoder input
(denoising), and the trained encoder weights can be transplanted into a
classifier as its initial LSTM parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stressseq.core.rng import derived_rng
from stressseq.nn import layers
from stressseq.nn.checkpoint import Checkpoint
from stressseq.nn.losses import mse
from stressseq.nn.model import NetworkSpec, SequenceClassifier, init_classifier
from stressseq.nn.optim import Adam


@dataclass(frozen=True)
class AePretrainSpec:
    noise_sigma: float = 0.05
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    holdout_fraction: float = 0.1
    reverse_decode: bool = False
    unlabeled_source: str = "all"  # or "active_selected"

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.unlabeled_source not in ("all", "active_selected"):
            raise ValueError("unlabeled_source must be 'all' or 'active_selected'")

    def to_dict(self) -> dict:
        return {
            "noise_sigma": self.noise_sigma,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "holdout_fraction": self.holdout_fraction,
            "reverse_decode": self.reverse_decode,
            "unlabeled_source": self.unlabeled_source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AePretrainSpec":
        known = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
        return cls(**{k: v for k, v in d.items() if k in known})


def ae_loss(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean squared reconstruction error over all B*T*F elements."""
    return mse(x, x_hat)[0]


class SequenceAutoencoder:
    def __init__(self, spec: NetworkSpec, params: dict, reverse_decode: bool = False):
        self.spec = spec
        self.params = params
        self.reverse_decode = reverse_decode

    @property
    def latent_dim(self) -> int:
        return self.spec.lstm_units[-1]

    @staticmethod
    def param_names(spec: NetworkSpec) -> list:
        names = []
        for li in range(len(spec.lstm_units)):
            names += [f"enc{li}.W", f"enc{li}.U", f"enc{li}.b"]
        for li in range(len(spec.lstm_units)):
            names += [f"dec{li}.W", f"dec{li}.U", f"dec{li}.b"]
        names += ["proj.W", "proj.b"]
        return names

    def _stack_params(self, prefix: str, li: int) -> dict:
        return {
            "W": self.params[f"{prefix}{li}.W"],
            "U": self.params[f"{prefix}{li}.U"],
            "b": self.params[f"{prefix}{li}.b"],
        }

    def forward(
        self,
        x: np.ndarray,
        noise_sigma: float = 0.0,
        mode: str = "eval",
        rng: np.random.Generator | None = None,
    ):
        """Returns (reconstruction (B,T,F), latents (B,H), cache).

        Noise is applied to the encoder input in train mode only; the
        reconstruction target stays the clean input.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.spec.input_dim:
            raise ValueError(
                f"expected (B, T, {self.spec.input_dim}) input, got {x.shape}"
            )
        spec = self.spec
        batch, steps, _ = x.shape
        noised = x
        if mode == "train" and noise_sigma > 0:
            if rng is None:
                raise ValueError("train mode with noise requires an rng")
            noised = x + noise_sigma * rng.standard_normal(x.shape)

        h = noised
        enc_caches = []
        for li in range(len(spec.lstm_units)):
            h, cache = layers.lstm_forward(
                self._stack_params("enc", li),
                h,
                dropout=spec.lstm_dropout,
                recurrent_dropout=spec.lstm_recurrent_dropout,
                mode=mode,
                rng=rng,
            )
            enc_caches.append(cache)
        latents = h[:, -1, :]

        d = np.broadcast_to(latents[:, None, :], (batch, steps, latents.shape[1])).copy()
        dec_caches = []
        for li in range(len(spec.lstm_units)):
            d, cache = layers.lstm_forward(
                self._stack_params("dec", li),
                d,
                dropout=spec.lstm_dropout,
                recurrent_dropout=spec.lstm_recurrent_dropout,
                mode=mode,
                rng=rng,
            )
            dec_caches.append(cache)

        top = d.reshape(batch * steps, -1)
        proj, proj_cache = layers.dense_forward(top, self.params["proj.W"], self.params["proj.b"])
        x_hat = proj.reshape(batch, steps, spec.input_dim)
        if self.reverse_decode:
            x_hat = x_hat[:, ::-1, :]
        cache = {
            "enc": enc_caches,
            "dec": dec_caches,
            "proj": proj_cache,
            "shape": (batch, steps),
        }
        return x_hat, latents, cache

    def backward(self, cache: dict, d_x_hat: np.ndarray) -> dict:
        spec = self.spec
        batch, steps = cache["shape"]
        grads = {}
        if self.reverse_decode:
            d_x_hat = d_x_hat[:, ::-1, :]
        d_proj = d_x_hat.reshape(batch * steps, spec.input_dim)
        d_proj_w, d_proj_b, d_top = layers.dense_backward(cache["proj"], d_proj)
        grads["proj.W"], grads["proj.b"] = d_proj_w, d_proj_b
        d_seq = d_top.reshape(batch, steps, -1)
        for li in range(len(spec.lstm_units) - 1, -1, -1):
            layer_grads, d_seq = layers.lstm_backward(cache["dec"][li], d_seq)
            grads[f"dec{li}.W"] = layer_grads["W"]
            grads[f"dec{li}.U"] = layer_grads["U"]
            grads[f"dec{li}.b"] = layer_grads["b"]
        # The repeated latent fans out to every decoder timestep.
        d_latent = d_seq.sum(axis=1)
        d_enc_seq = np.zeros((batch, steps, self.latent_dim))
        d_enc_seq[:, -1] = d_latent
        for li in range(len(spec.lstm_units) - 1, -1, -1):
            layer_grads, d_enc_seq = layers.lstm_backward(cache["enc"][li], d_enc_seq)
            grads[f"enc{li}.W"] = layer_grads["W"]
            grads[f"enc{li}.U"] = layer_grads["U"]
            grads[f"enc{li}.b"] = layer_grads["b"]
        return grads

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode latent vectors (no noise, no dropout)."""
        _, latents, _ = self.forward(x, noise_sigma=0.0, mode="eval")
        return latents

    def copy(self) -> "SequenceAutoencoder":
        return SequenceAutoencoder(
            self.spec,
            {k: v.copy() for k, v in self.params.items()},
            reverse_decode=self.reverse_decode,
        )

    def to_checkpoint(self, meta: dict | None = None) -> Checkpoint:
        return Checkpoint(
            kind="autoencoder",
            network=self.spec.to_dict(),
            params={k: v.copy() for k, v in self.params.items()},
            state={},
            meta=dict(meta or {}),
        )


def init_autoencoder(
    spec: NetworkSpec, seed: int, reverse_decode: bool = False
) -> SequenceAutoencoder:
    rng = derived_rng(seed, "autoencoder-init")
    params = {}
    in_dim = spec.input_dim
    for li, units in enumerate(spec.lstm_units):
        layer = layers.init_lstm_params(in_dim, units, rng)
        params[f"enc{li}.W"] = layer["W"]
        params[f"enc{li}.U"] = layer["U"]
        params[f"enc{li}.b"] = layer["b"]
        in_dim = units
    in_dim = spec.lstm_units[-1]
    for li, units in enumerate(reversed(spec.lstm_units)):
        layer = layers.init_lstm_params(in_dim, units, rng)
        params[f"dec{li}.W"] = layer["W"]
        params[f"dec{li}.U"] = layer["U"]
        params[f"dec{li}.b"] = layer["b"]
        in_dim = units
    proj = layers.init_dense_params(in_dim, spec.input_dim, rng)
    params["proj.W"], params["proj.b"] = proj["W"], proj["b"]
    return SequenceAutoencoder(spec, params, reverse_decode=reverse_decode)


class PretrainDiverged(RuntimeError):
    pass


def pretrain(
    windows: np.ndarray,
    spec: AePretrainSpec,
    network: NetworkSpec,
    seed: int,
):
    """Train an autoencoder on (N, T, F) standardized windows.

    Returns (autoencoder, curve) where curve is a list of
    (epoch, train_mse, holdout_mse) rows; the holdout is a seeded 10% slice
    reconstructed in eval mode without noise.
    """
    windows = np.asarray(windows, dtype=np.float64)
    n = windows.shape[0]
    if n < 2:
        raise ValueError("need at least 2 windows to pretrain")
    rng = derived_rng(seed, "ae-pretrain")
    order = rng.permutation(n)
    n_holdout = max(1, int(round(n * spec.holdout_fraction)))
    holdout_idx = order[:n_holdout]
    train_idx = order[n_holdout:]
    if train_idx.size == 0:
        train_idx, holdout_idx = holdout_idx, train_idx

    ae = init_autoencoder(network, seed, reverse_decode=spec.reverse_decode)
    optimizer = Adam(spec.learning_rate)
    holdout = windows[holdout_idx] if holdout_idx.size else None

    curve = []
    for epoch in range(1, spec.epochs + 1):
        epoch_order = rng.permutation(train_idx)
        losses_this_epoch = []
        for start in range(0, epoch_order.size, spec.batch_size):
            batch_idx = epoch_order[start : start + spec.batch_size]
            x = windows[batch_idx]
            x_hat, _, cache = ae.forward(
                x, noise_sigma=spec.noise_sigma, mode="train", rng=rng
            )
            loss, d_x_hat = mse(x, x_hat)
            if not np.isfinite(loss):
                raise PretrainDiverged(
                    f"reconstruction loss became non-finite at epoch {epoch} "
                    f"(learning rate {spec.learning_rate}); reduce the rate or noise"
                )
            grads = ae.backward(cache, d_x_hat)
            optimizer.step(ae.params, grads)
            losses_this_epoch.append(loss)
        train_mse = float(np.mean(losses_this_epoch)) if losses_this_epoch else float("nan")
        if holdout is not None:
            x_hat, _, _ = ae.forward(holdout, mode="eval")
            holdout_mse = ae_loss(holdout, x_hat)
        else:
            holdout_mse = float("nan")
        curve.append((epoch, train_mse, holdout_mse))
    return ae, curve


def transplant(
    ae: SequenceAutoencoder | Checkpoint,
    classifier_spec: NetworkSpec,
    seed: int,
) -> SequenceClassifier:
    """Classifier whose LSTM stack starts from the encoder's weights.

    Batch-norm, dense, and head parameters are freshly initialized from
    ``seed``; encoder layer shapes must match the classifier stack exactly.
    """
    if isinstance(ae, Checkpoint):
        if ae.kind != "autoencoder":
            raise ValueError(f"cannot transplant from a {ae.kind} checkpoint")
        enc_params = ae.params
        enc_units = tuple(ae.network["lstm_units"])
    else:
        enc_params = ae.params
        enc_units = ae.spec.lstm_units
    if len(enc_units) != len(classifier_spec.lstm_units):
        raise ValueError(
            f"encoder has {len(enc_units)} LSTM layers, classifier expects "
            f"{len(classifier_spec.lstm_units)}"
        )
    model = init_classifier(classifier_spec, seed)
    for li in range(len(classifier_spec.lstm_units)):
        for part in ("W", "U", "b"):
            src = enc_params[f"enc{li}.{part}"]
            dst = model.params[f"lstm{li}.{part}"]
            if src.shape != dst.shape:
                raise ValueError(
                    f"layer lstm{li}.{part}: encoder shape {src.shape} != "
                    f"classifier shape {dst.shape}"
                )
            model.params[f"lstm{li}.{part}"] = src.copy()
    return model
