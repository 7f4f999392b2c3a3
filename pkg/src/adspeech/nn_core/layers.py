"""Dense-tensor layers with hand-written gradients.

Activations flow as ``(B, C, L)`` arrays for the convolutional trunk and
``(B, H)`` after flattening. Every layer implements::

    y, cache = layer.forward(x, mode, rng)
    dx = layer.backward(dy, cache)      # fills layer.grads

Convolutions follow the time-delay form where tap ``n`` of a kernel reads
the input ``n`` frames before the output position.
"""

from __future__ import annotations

import numpy as np

from ..errors import BatchTooSmall, DimensionMismatch, InputTooShort, LengthTooShort

TRAIN = "train"
INFER = "infer"


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# --------------------------------------------------------------------------
# convolution kernels shared by the plain and gated layers


def _lag_stack(x: np.ndarray, n_taps: int) -> np.ndarray:
    """(B, F, T) -> (B, F*N, M) with ``cols[b, f*N + n, m] = x[b, f, m + N-1-n]``."""
    b, f, t = x.shape
    m = t - n_taps + 1
    cols = np.empty((b, f, n_taps, m))
    for n in range(n_taps):
        s = n_taps - 1 - n
        cols[:, :, n, :] = x[:, :, s : s + m]
    return cols.reshape(b, f * n_taps, m)


def _lag_unstack(dcols: np.ndarray, f: int, n_taps: int, t: int) -> np.ndarray:
    b, _, m = dcols.shape
    d = dcols.reshape(b, f, n_taps, m)
    dx = np.zeros((b, f, t))
    for n in range(n_taps):
        s = n_taps - 1 - n
        dx[:, :, s : s + m] += d[:, :, n, :]
    return dx


def valid_conv(x: np.ndarray, w: np.ndarray, bias: np.ndarray):
    """Valid time-delay convolution; returns ``(y, cols)``."""
    k, f, n = w.shape
    if x.shape[1] != f:
        raise DimensionMismatch(f"input has {x.shape[1]} rows, kernel expects {f}")
    if x.shape[2] < n:
        raise InputTooShort(f"input length {x.shape[2]} shorter than kernel window {n}")
    cols = _lag_stack(x, n)
    y = np.matmul(w.reshape(k, f * n), cols) + bias[None, :, None]
    return y, cols


def valid_conv_backward(dy, cols, w, t_in):
    k, f, n = w.shape
    wm = w.reshape(k, f * n)
    dw = np.tensordot(dy, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
    db = dy.sum(axis=(0, 2))
    dx = _lag_unstack(np.matmul(wm.T, dy), f, n, t_in)
    return dx, dw, db


# --------------------------------------------------------------------------


class Layer:
    name = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def out_shape(self, shape):
        return shape

    def zero_grad(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(f'{k}={v.shape}' for k, v in self.params.items())})"


class ConvLayer(Layer):
    """Valid convolution over time with full-height kernels ``W: (K, F, N)``."""

    name = "conv"

    def __init__(self, w: np.ndarray, b: np.ndarray, activation: str = "none"):
        super().__init__()
        if activation not in ("none", "relu"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.params = {"W": np.asarray(w, dtype=np.float64), "b": np.asarray(b, dtype=np.float64)}
        self.activation = activation

    @property
    def window(self) -> int:
        return self.params["W"].shape[2]

    def out_shape(self, shape):
        c, t = shape
        return (self.params["W"].shape[0], t - self.window + 1)

    def forward(self, x, mode=TRAIN, rng=None):
        w = self.params["W"]
        y, cols = valid_conv(x, w, self.params["b"])
        if self.activation == "relu":
            y = np.maximum(y, 0.0)
        return y, (cols, x.shape[2], y)

    def backward(self, dy, cache):
        cols, t_in, y = cache
        if self.activation == "relu":
            dy = dy * (y > 0)
        dx, dw, db = valid_conv_backward(dy, cols, self.params["W"], t_in)
        self.grads = {"W": dw, "b": db}
        return dx


class GatedConvLayer(Layer):
    """Gated linear unit over causally padded time-delay convolutions.

    ``y = (V*x + e) * sigmoid(norm(W*x + b))`` where ``norm`` is an optional
    batch normalization of the gate pre-activation. Output length equals
    input length (``N - 1`` zeros are prepended).
    """

    name = "gated_conv"

    def __init__(self, v, e, w, b, gate_norm: "BatchNormLayer | None" = None):
        super().__init__()
        v, w = np.asarray(v, dtype=np.float64), np.asarray(w, dtype=np.float64)
        if v.shape != w.shape:
            raise DimensionMismatch("linear and gate kernels must have the same shape")
        self.params = {"V": v, "e": np.asarray(e, dtype=np.float64), "W": w, "b": np.asarray(b, dtype=np.float64)}
        self.gate_norm = gate_norm
        if gate_norm is not None:
            self.params["gamma"] = gate_norm.params["gamma"]
            self.params["beta"] = gate_norm.params["beta"]
            self.buffers = gate_norm.buffers

    @property
    def window(self) -> int:
        return self.params["W"].shape[2]

    def out_shape(self, shape):
        return (self.params["W"].shape[0], shape[1])

    def forward(self, x, mode=TRAIN, rng=None):
        k, f, n = self.params["W"].shape
        if x.shape[2] < 1:
            raise InputTooShort("empty input")
        xp = np.concatenate([np.zeros((x.shape[0], x.shape[1], n - 1)), x], axis=2) if n > 1 else x
        both_w = np.concatenate([self.params["V"], self.params["W"]], axis=0)
        both_b = np.concatenate([self.params["e"], self.params["b"]])
        z, cols = valid_conv(xp, both_w, both_b)
        lin, gate_pre = z[:, :k], z[:, k:]
        norm_cache = None
        if self.gate_norm is not None:
            gate_pre, norm_cache = self.gate_norm.forward(gate_pre, mode)
        s = sigmoid(gate_pre)
        return lin * s, (cols, xp.shape[2], lin, s, norm_cache)

    def backward(self, dy, cache):
        cols, t_pad, lin, s, norm_cache = cache
        k, f, n = self.params["W"].shape
        dlin = dy * s
        dgate = dy * lin * s * (1.0 - s)
        if self.gate_norm is not None:
            dgate = self.gate_norm.backward(dgate, norm_cache)
        both_w = np.concatenate([self.params["V"], self.params["W"]], axis=0)
        dxp, dw_both, db_both = valid_conv_backward(np.concatenate([dlin, dgate], axis=1), cols, both_w, t_pad)
        self.grads = {"V": dw_both[:k], "e": db_both[:k], "W": dw_both[k:], "b": db_both[k:]}
        if self.gate_norm is not None:
            self.grads["gamma"] = self.gate_norm.grads["gamma"]
            self.grads["beta"] = self.gate_norm.grads["beta"]
        return dxp[:, :, n - 1 :]


class BatchNormLayer(Layer):
    """Per-channel batch normalization for ``(B, C)`` or ``(B, C, L)`` input.

    Training statistics pool the batch and time axes; the population
    variance is used both for normalizing and for the running estimate.
    """

    name = "batchnorm"

    def __init__(self, channels: int, epsilon: float = 1e-5, momentum: float = 0.9):
        super().__init__()
        self.params = {"gamma": np.ones(channels), "beta": np.zeros(channels)}
        self.buffers = {"running_mean": np.zeros(channels), "running_var": np.ones(channels)}
        self.epsilon = epsilon
        self.momentum = momentum

    @staticmethod
    def _axes(x):
        return (0, 2) if x.ndim == 3 else (0,)

    @staticmethod
    def _bc(v, x):
        return v[None, :, None] if x.ndim == 3 else v[None, :]

    def forward(self, x, mode=TRAIN, rng=None):
        axes = self._axes(x)
        gamma, beta = self.params["gamma"], self.params["beta"]
        if mode == TRAIN:
            if x.shape[0] < 2:
                raise BatchTooSmall(f"batch normalization needs >= 2 examples in training, got {x.shape[0]}")
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.buffers["running_mean"][...] = m * self.buffers["running_mean"] + (1 - m) * mu
            self.buffers["running_var"][...] = m * self.buffers["running_var"] + (1 - m) * var
        else:
            mu = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (x - self._bc(mu, x)) * self._bc(inv, x)
        return self._bc(gamma, x) * xhat + self._bc(beta, x), (xhat, inv, mode)

    def backward(self, dy, cache):
        xhat, inv, mode = cache
        axes = self._axes(dy)
        gamma = self.params["gamma"]
        self.grads = {"gamma": np.sum(dy * xhat, axis=axes), "beta": dy.sum(axis=axes)}
        dxhat = dy * self._bc(gamma, dy)
        if mode != TRAIN:
            return dxhat * self._bc(inv, dy)
        m = dy.size / dy.shape[1]
        s1 = dxhat.sum(axis=axes)
        s2 = np.sum(dxhat * xhat, axis=axes)
        return self._bc(inv, dy) / m * (m * dxhat - self._bc(s1, dy) - xhat * self._bc(s2, dy))


class ReLU(Layer):
    name = "relu"

    def forward(self, x, mode=TRAIN, rng=None):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, mask):
        return dy * mask


class MaxPoolHalve(Layer):
    """Window-2 stride-2 max pooling over time; a trailing odd frame is dropped."""

    name = "maxpool"

    def out_shape(self, shape):
        return (shape[0], shape[1] // 2)

    def forward(self, x, mode=TRAIN, rng=None):
        b, c, t = x.shape
        if t < 2:
            raise LengthTooShort(f"cannot halve a length-{t} sequence")
        h = t // 2
        pairs = x[:, :, : 2 * h].reshape(b, c, h, 2)
        arg = np.argmax(pairs, axis=3)  # ties -> first
        y = np.take_along_axis(pairs, arg[..., None], axis=3)[..., 0]
        return y, (arg, t)

    def backward(self, dy, cache):
        arg, t = cache
        b, c, h = dy.shape
        dpairs = np.zeros((b, c, h, 2))
        np.put_along_axis(dpairs, arg[..., None], dy[..., None], axis=3)
        dx = np.zeros((b, c, t))
        dx[:, :, : 2 * h] = dpairs.reshape(b, c, 2 * h)
        return dx


class RightPad(Layer):
    """Zero-pads the time axis on the right up to ``length``."""

    name = "rightpad"

    def __init__(self, length: int):
        super().__init__()
        self.length = length

    def out_shape(self, shape):
        return (shape[0], max(shape[1], self.length))

    def forward(self, x, mode=TRAIN, rng=None):
        t = x.shape[2]
        if t >= self.length:
            return x, t
        return np.concatenate([x, np.zeros(x.shape[:2] + (self.length - t,))], axis=2), t

    def backward(self, dy, t):
        return dy[:, :, :t]


class Flatten(Layer):
    name = "flatten"

    def out_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, mode=TRAIN, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, shape):
        return dy.reshape(shape)


class DenseLayer(Layer):
    """Affine map with weights ``(H, O)``; optional ReLU or sigmoid."""

    name = "dense"

    def __init__(self, w, b, activation: str = "none"):
        super().__init__()
        if activation not in ("none", "relu", "sigmoid"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.params = {"W": np.asarray(w, dtype=np.float64), "b": np.asarray(b, dtype=np.float64)}
        self.activation = activation

    def out_shape(self, shape):
        return (self.params["W"].shape[0],)

    def forward(self, x, mode=TRAIN, rng=None):
        w = self.params["W"]
        if x.ndim != 2 or x.shape[1] != w.shape[1]:
            raise DimensionMismatch(f"dense layer expects {w.shape[1]} inputs, got {x.shape[1:]}")
        z = x @ w.T + self.params["b"]
        if self.activation == "relu":
            y = np.maximum(z, 0.0)
        elif self.activation == "sigmoid":
            y = sigmoid(z)
        else:
            y = z
        return y, (x, y)

    def backward(self, dy, cache):
        x, y = cache
        if self.activation == "relu":
            dy = dy * (y > 0)
        elif self.activation == "sigmoid":
            dy = dy * y * (1.0 - y)
        self.grads = {"W": dy.T @ x, "b": dy.sum(axis=0)}
        return dy @ self.params["W"]


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)`` in training."""

    name = "dropout"

    def __init__(self, rate: float = 0.5):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate

    def forward(self, x, mode=TRAIN, rng=None):
        if mode != TRAIN or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in training mode needs an rng")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dy, mask):
        return dy if mask is None else dy * mask


def dropout_apply(v, rate, mode, rng):
    return Dropout(rate).forward(np.asarray(v, dtype=np.float64), mode, rng)[0]


def conv1d_forward(x, layer: ConvLayer):
    """Single-example valid convolution, ``(F, T) -> (K, T - N + 1)``."""
    return layer.forward(np.asarray(x, dtype=np.float64)[None], INFER)[0][0]


def gated_conv_forward(x, layer: GatedConvLayer):
    """Single-example gated convolution, ``(F, T) -> (K, T)``."""
    return layer.forward(np.asarray(x, dtype=np.float64)[None], INFER)[0][0]


def maxpool_halve(y):
    return MaxPoolHalve().forward(np.asarray(y, dtype=np.float64)[None], INFER)[0][0]


def batchnorm_forward(x, layer: BatchNormLayer, mode=TRAIN):
    return layer.forward(np.asarray(x, dtype=np.float64), mode)[0]


def dense_forward(z, layer: DenseLayer):
    return layer.forward(np.atleast_2d(np.asarray(z, dtype=np.float64)), INFER)[0][0]
