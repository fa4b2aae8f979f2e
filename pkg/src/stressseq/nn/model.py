"""Sequence classifier: stacked LSTM, batch normalization, dense head."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from stressseq.core.rng import derived_rng
from stressseq.nn import layers


@dataclass(frozen=True)
class NetworkSpec:
    """Topology of the classifier (and of the autoencoder built from it)."""

    input_dim: int
    lstm_units: tuple = (64, 64, 64)
    lstm_dropout: float = 0.3
    lstm_recurrent_dropout: float = 0.0
    use_batchnorm: bool = True
    dense_hidden: int = 512
    dense_dropout: float = 0.5
    bn_momentum: float = 0.1
    bn_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "lstm_units", tuple(int(u) for u in self.lstm_units))
        if not self.lstm_units:
            raise ValueError("need at least one LSTM layer")
        for rate in (self.lstm_dropout, self.lstm_recurrent_dropout, self.dense_dropout):
            if not 0.0 <= rate < 1.0:
                raise ValueError("dropout rates must lie in [0, 1)")

    def with_input_dim(self, input_dim: int) -> "NetworkSpec":
        return replace(self, input_dim=input_dim)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "lstm_units": list(self.lstm_units),
            "lstm_dropout": self.lstm_dropout,
            "lstm_recurrent_dropout": self.lstm_recurrent_dropout,
            "use_batchnorm": self.use_batchnorm,
            "dense_hidden": self.dense_hidden,
            "dense_dropout": self.dense_dropout,
            "bn_momentum": self.bn_momentum,
            "bn_eps": self.bn_eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        d = dict(d)
        d["lstm_units"] = tuple(d["lstm_units"])
        return cls(**d)


class SequenceClassifier:
    """LSTM stack -> last hidden state -> BN -> dense+ReLU -> dropout -> logit."""

    def __init__(self, spec: NetworkSpec, params: dict, bn_state: dict):
        self.spec = spec
        self.params = params
        self.bn_state = bn_state

    @staticmethod
    def param_names(spec: NetworkSpec) -> list:
        names = []
        for li in range(len(spec.lstm_units)):
            names += [f"lstm{li}.W", f"lstm{li}.U", f"lstm{li}.b"]
        if spec.use_batchnorm:
            names += ["bn.gamma", "bn.beta"]
        names += ["dense.W", "dense.b", "head.W", "head.b"]
        return names

    @staticmethod
    def state_names(spec: NetworkSpec) -> list:
        return ["bn.running_mean", "bn.running_var"] if spec.use_batchnorm else []

    def _lstm_params(self, li: int) -> dict:
        return {
            "W": self.params[f"lstm{li}.W"],
            "U": self.params[f"lstm{li}.U"],
            "b": self.params[f"lstm{li}.b"],
        }

    def forward(
        self,
        x: np.ndarray,
        mode: str = "eval",
        rng: np.random.Generator | None = None,
        update_stats: bool = True,
    ):
        """Returns (logits (B,), cache). Eval mode consumes no randomness
        and mutates no state."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.spec.input_dim:
            raise ValueError(
                f"expected (B, T, {self.spec.input_dim}) input, got {x.shape}"
            )
        spec = self.spec
        h = x
        lstm_caches = []
        for li in range(len(spec.lstm_units)):
            h, cache = layers.lstm_forward(
                self._lstm_params(li),
                h,
                dropout=spec.lstm_dropout,
                recurrent_dropout=spec.lstm_recurrent_dropout,
                mode=mode,
                rng=rng,
            )
            lstm_caches.append(cache)
        last_hidden = h[:, -1, :]

        bn_cache = None
        z = last_hidden
        if spec.use_batchnorm:
            z, bn_cache = layers.batchnorm_forward(
                z,
                self.params["bn.gamma"],
                self.params["bn.beta"],
                self.bn_state,
                momentum=spec.bn_momentum,
                eps=spec.bn_eps,
                mode=mode,
                update_stats=update_stats,
            )
        d1, dense_cache = layers.dense_forward(z, self.params["dense.W"], self.params["dense.b"])
        r, relu_cache = layers.relu_forward(d1)
        dr, drop_cache = layers.dropout_forward(r, spec.dense_dropout, mode, rng)
        out, head_cache = layers.dense_forward(dr, self.params["head.W"], self.params["head.b"])
        logits = out[:, 0]
        cache = {
            "lstm": lstm_caches,
            "bn": bn_cache,
            "dense": dense_cache,
            "relu": relu_cache,
            "dropout": drop_cache,
            "head": head_cache,
            "last_hidden": last_hidden,
            "batch_time": x.shape[:2],
        }
        return logits, cache

    def backward(self, cache: dict, d_logits: np.ndarray):
        """Returns (grads keyed like params, d_input (B, T, F))."""
        spec = self.spec
        grads = {}
        d_out = np.asarray(d_logits, dtype=np.float64)[:, None]
        d_head_w, d_head_b, d_dr = layers.dense_backward(cache["head"], d_out)
        grads["head.W"], grads["head.b"] = d_head_w, d_head_b
        d_r = layers.dropout_backward(cache["dropout"], d_dr)
        d_d1 = layers.relu_backward(cache["relu"], d_r)
        d_dense_w, d_dense_b, d_z = layers.dense_backward(cache["dense"], d_d1)
        grads["dense.W"], grads["dense.b"] = d_dense_w, d_dense_b
        if spec.use_batchnorm:
            d_gamma, d_beta, d_last = layers.batchnorm_backward(cache["bn"], d_z)
            grads["bn.gamma"], grads["bn.beta"] = d_gamma, d_beta
        else:
            d_last = d_z
        batch, steps = cache["batch_time"]
        d_h_seq = np.zeros((batch, steps, spec.lstm_units[-1]))
        d_h_seq[:, -1] = d_last
        for li in range(len(spec.lstm_units) - 1, -1, -1):
            layer_grads, d_h_seq = layers.lstm_backward(cache["lstm"][li], d_h_seq)
            grads[f"lstm{li}.W"] = layer_grads["W"]
            grads[f"lstm{li}.U"] = layer_grads["U"]
            grads[f"lstm{li}.b"] = layer_grads["b"]
        return grads, d_h_seq

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x, mode="eval")
        return layers.sigmoid(logits)

    def copy(self) -> "SequenceClassifier":
        return SequenceClassifier(
            self.spec,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.bn_state.items()},
        )


def init_classifier(spec: NetworkSpec, seed: int) -> SequenceClassifier:
    rng = derived_rng(seed, "classifier-init")
    params = {}
    in_dim = spec.input_dim
    for li, units in enumerate(spec.lstm_units):
        layer = layers.init_lstm_params(in_dim, units, rng)
        params[f"lstm{li}.W"] = layer["W"]
        params[f"lstm{li}.U"] = layer["U"]
        params[f"lstm{li}.b"] = layer["b"]
        in_dim = units
    top = spec.lstm_units[-1]
    bn_state = {}
    if spec.use_batchnorm:
        params["bn.gamma"] = np.ones(top)
        params["bn.beta"] = np.zeros(top)
        bn_state = {"running_mean": np.zeros(top), "running_var": np.ones(top)}
    dense = layers.init_dense_params(top, spec.dense_hidden, rng)
    params["dense.W"], params["dense.b"] = dense["W"], dense["b"]
    head = layers.init_dense_params(spec.dense_hidden, 1, rng)
    params["head.W"], params["head.b"] = head["W"], head["b"]
    return SequenceClassifier(spec, params, bn_state)
