"""Differentiable building blocks with analytic backward passes.

Everything is float64 and deterministic given an explicit generator. Train
mode uses inverted dropout (scaling at train time), so eval mode is a plain
pass with no mask arithmetic. Each forward returns (output, cache) and each
backward consumes that cache; backward passes are exact gradients of the
forward computation and are finite-difference checked in the test suite.
"""
from __future__ import annotations

import numpy as np

GATES = 4  # input, forget, candidate, output


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_lstm_params(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> dict:
    """Glorot-uniform gate weights, per-gate orthogonal recurrent weights,
    zero biases with the forget-gate slice at one."""
    limit = np.sqrt(6.0 / (input_dim + GATES * hidden_dim))
    w = rng.uniform(-limit, limit, size=(GATES * hidden_dim, input_dim))
    blocks = []
    for _ in range(GATES):
        a = rng.standard_normal((hidden_dim, hidden_dim))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
        blocks.append(q)
    u = np.concatenate(blocks, axis=0)
    b = np.zeros(GATES * hidden_dim)
    b[hidden_dim : 2 * hidden_dim] = 1.0
    return {"W": w, "U": u, "b": b}


def make_dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted-dropout mask: keep with probability 1-rate, scale by 1/(1-rate)."""
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def lstm_forward(
    params: dict,
    x: np.ndarray,
    dropout: float = 0.0,
    recurrent_dropout: float = 0.0,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
):
    """LSTM over a (B, T, D) batch -> (B, T, H) hidden sequence.

    Train mode draws a fresh input-dropout mask per timestep and one
    recurrent mask per sequence (variational recurrent dropout).
    """
    if x.ndim != 3:
        raise ValueError("input must be (batch, time, features)")
    w, u, b = params["W"], params["U"], params["b"]
    batch, steps, dim = x.shape
    hidden = u.shape[1]
    if w.shape != (GATES * hidden, dim):
        raise ValueError(f"W shape {w.shape} incompatible with input dim {dim}")

    input_mask = None
    rec_mask = None
    if mode == "train":
        if (dropout > 0 or recurrent_dropout > 0) and rng is None:
            raise ValueError("train mode with dropout requires an rng")
        if dropout > 0:
            input_mask = make_dropout_mask(rng, (batch, steps, dim), dropout)
        if recurrent_dropout > 0:
            rec_mask = make_dropout_mask(rng, (batch, hidden), recurrent_dropout)

    x_dropped = x if input_mask is None else x * input_mask
    # One big projection of all timesteps through W.
    xw = x_dropped.reshape(batch * steps, dim) @ w.T
    xw = xw.reshape(batch, steps, GATES * hidden)

    gates_i = np.empty((batch, steps, hidden))
    gates_f = np.empty((batch, steps, hidden))
    gates_g = np.empty((batch, steps, hidden))
    gates_o = np.empty((batch, steps, hidden))
    cells = np.empty((batch, steps, hidden))
    tanh_c = np.empty((batch, steps, hidden))
    hidden_seq = np.empty((batch, steps, hidden))

    h_prev = np.zeros((batch, hidden))
    c_prev = np.zeros((batch, hidden))
    for t in range(steps):
        h_in = h_prev if rec_mask is None else h_prev * rec_mask
        a = xw[:, t] + h_in @ u.T + b
        i_t = sigmoid(a[:, :hidden])
        f_t = sigmoid(a[:, hidden : 2 * hidden])
        g_t = np.tanh(a[:, 2 * hidden : 3 * hidden])
        o_t = sigmoid(a[:, 3 * hidden :])
        c_t = f_t * c_prev + i_t * g_t
        tc = np.tanh(c_t)
        h_t = o_t * tc
        gates_i[:, t], gates_f[:, t], gates_g[:, t], gates_o[:, t] = i_t, f_t, g_t, o_t
        cells[:, t], tanh_c[:, t], hidden_seq[:, t] = c_t, tc, h_t
        h_prev, c_prev = h_t, c_t

    cache = {
        "x_dropped": x_dropped,
        "input_mask": input_mask,
        "rec_mask": rec_mask,
        "i": gates_i,
        "f": gates_f,
        "g": gates_g,
        "o": gates_o,
        "c": cells,
        "tanh_c": tanh_c,
        "h": hidden_seq,
        "W": w,
        "U": u,
    }
    return hidden_seq, cache


def lstm_backward(cache: dict, d_hidden_seq: np.ndarray):
    """Exact gradients for lstm_forward.

    Returns (grads {W, U, b}, d_input).
    """
    w, u = cache["W"], cache["U"]
    x_dropped = cache["x_dropped"]
    rec_mask = cache["rec_mask"]
    gi, gf, gg, go = cache["i"], cache["f"], cache["g"], cache["o"]
    cells, tanh_c, hs = cache["c"], cache["tanh_c"], cache["h"]
    batch, steps, hidden = hs.shape

    d_w = np.zeros_like(w)
    d_u = np.zeros_like(u)
    d_b = np.zeros(GATES * hidden)
    d_x_dropped = np.empty_like(x_dropped)
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))

    for t in range(steps - 1, -1, -1):
        dh = d_hidden_seq[:, t] + dh_next
        do = dh * tanh_c[:, t]
        dc = dh * go[:, t] * (1.0 - tanh_c[:, t] ** 2) + dc_next
        c_prev = cells[:, t - 1] if t > 0 else np.zeros((batch, hidden))
        di = dc * gg[:, t]
        dg = dc * gi[:, t]
        df = dc * c_prev
        dc_next = dc * gf[:, t]

        da = np.concatenate(
            [
                di * gi[:, t] * (1.0 - gi[:, t]),
                df * gf[:, t] * (1.0 - gf[:, t]),
                dg * (1.0 - gg[:, t] ** 2),
                do * go[:, t] * (1.0 - go[:, t]),
            ],
            axis=1,
        )
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((batch, hidden))
        h_in = h_prev if rec_mask is None else h_prev * rec_mask
        d_w += da.T @ x_dropped[:, t]
        d_u += da.T @ h_in
        d_b += da.sum(axis=0)
        d_x_dropped[:, t] = da @ w
        dh_prev = da @ u
        dh_next = dh_prev if rec_mask is None else dh_prev * rec_mask

    d_input = d_x_dropped if cache["input_mask"] is None else d_x_dropped * cache["input_mask"]
    return {"W": d_w, "U": d_u, "b": d_b}, d_input


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    state: dict,
    momentum: float = 0.1,
    eps: float = 1e-8,
    mode: str = "eval",
    update_stats: bool = True,
):
    """Batch normalization over (B, H). Train mode normalizes with batch
    statistics (biased variance) and blends them into the running estimates;
    eval mode uses the running estimates and mutates nothing."""
    if mode == "train":
        if x.shape[0] < 2:
            raise ValueError("batch normalization needs batch size >= 2 in train mode")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu) * inv_std
        if update_stats:
            state["running_mean"] = (1.0 - momentum) * state["running_mean"] + momentum * mu
            state["running_var"] = (1.0 - momentum) * state["running_var"] + momentum * var
    else:
        inv_std = 1.0 / np.sqrt(state["running_var"] + eps)
        xhat = (x - state["running_mean"]) * inv_std
    out = gamma * xhat + beta
    cache = {"xhat": xhat, "inv_std": inv_std, "gamma": gamma, "mode": mode}
    return out, cache


def batchnorm_backward(cache: dict, d_out: np.ndarray):
    """Returns (dgamma, dbeta, dx)."""
    xhat, inv_std, gamma = cache["xhat"], cache["inv_std"], cache["gamma"]
    d_gamma = np.sum(d_out * xhat, axis=0)
    d_beta = np.sum(d_out, axis=0)
    if cache["mode"] == "train":
        batch = d_out.shape[0]
        d_x = (gamma * inv_std / batch) * (
            batch * d_out - d_beta - xhat * d_gamma
        )
    else:
        d_x = d_out * gamma * inv_std
    return d_gamma, d_beta, d_x


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    out = x @ w.T + b
    return out, {"x": x, "W": w}


def dense_backward(cache: dict, d_out: np.ndarray):
    """Returns (dW, db, dx)."""
    d_w = d_out.T @ cache["x"]
    d_b = d_out.sum(axis=0)
    d_x = d_out @ cache["W"]
    return d_w, d_b, d_x


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0.0), {"x": x}


def relu_backward(cache: dict, d_out: np.ndarray):
    return d_out * (cache["x"] > 0)


def dropout_forward(
    x: np.ndarray, rate: float, mode: str, rng: np.random.Generator | None = None
):
    if mode == "train" and rate > 0:
        if rng is None:
            raise ValueError("train-mode dropout requires an rng")
        mask = make_dropout_mask(rng, x.shape, rate)
        return x * mask, {"mask": mask}
    return x, {"mask": None}


def dropout_backward(cache: dict, d_out: np.ndarray):
    if cache["mask"] is None:
        return d_out
    return d_out * cache["mask"]


def init_dense_params(in_dim: int, out_dim: int, rng: np.random.Generator) -> dict:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return {
        "W": rng.uniform(-limit, limit, size=(out_dim, in_dim)),
        "b": np.zeros(out_dim),
    }
