"""Model configuration, construction, forward and backward passes."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidConfig, NumericalFailure
from .layers import (
    INFER,
    BatchNormLayer,
    ConvLayer,
    DenseLayer,
    Dropout,
    Flatten,
    GatedConvLayer,
    Layer,
    MaxPoolHalve,
    ReLU,
    RightPad,
)
from .losses import bce_loss

SWEEP_DEPTHS = (1, 2, 3, 4, 6, 8, 10)
DEFAULT_WINDOW = {"cnn": 3, "gcnn": 2}


@dataclass
class ModelConfig:
    arch: str = "gcnn"
    depth: int = 1
    kernels: int = 64
    window: int | None = None  # 3 for cnn, 2 for gcnn
    hidden: int = 256
    dropout: float = 0.5
    input_dims: tuple[int, int] = (32, 100)  # (F, T_max)

    def __post_init__(self):
        if self.window is None:
            self.window = DEFAULT_WINDOW.get(self.arch, 3)
        self.input_dims = tuple(int(v) for v in self.input_dims)
        self.validate()

    def validate(self):
        if self.arch not in ("cnn", "gcnn"):
            raise InvalidConfig(f"arch must be cnn or gcnn, got {self.arch!r}")
        if self.depth < 1 or self.kernels < 1 or self.window < 1 or self.hidden < 1:
            raise InvalidConfig("depth, kernels, window and hidden must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must be in [0, 1)")
        if len(self.input_dims) != 2 or min(self.input_dims) < 1:
            raise InvalidConfig(f"bad input_dims {self.input_dims}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_dims"] = list(self.input_dims)
        return d


@dataclass
class Model:
    config: ModelConfig
    layers: list[Layer] = field(default_factory=list)

    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in build order (shared arrays appear once)."""
        seen, out = set(), []
        for layer in self.layers:
            for arr in layer.params.values():
                if id(arr) not in seen:
                    seen.add(id(arr))
                    out.append(arr)
        return out

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        seen, out = set(), []
        for i, layer in enumerate(self.layers):
            for k, arr in layer.params.items():
                if id(arr) not in seen:
                    seen.add(id(arr))
                    out.append((f"{i}.{layer.name}.{k}", arr))
        return out

    def buffers(self) -> list[np.ndarray]:
        seen, out = set(), []
        for layer in self.layers:
            for arr in layer.buffers.values():
                if id(arr) not in seen:
                    seen.add(id(arr))
                    out.append(arr)
        return out

    def state_arrays(self) -> list[np.ndarray]:
        return self.parameters() + self.buffers()

    def copy_state(self) -> list[np.ndarray]:
        return [a.copy() for a in self.state_arrays()]

    def load_state(self, arrays) -> None:
        for dst, src in zip(self.state_arrays(), arrays, strict=True):
            dst[...] = src

    def forward(self, x, mode=INFER, rng=None):
        return model_forward(x, self, mode, rng)

    def predict_proba(self, x, batch_size: int = 64) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = [model_forward(x[i : i + batch_size], self, INFER)[0] for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros(0)


def _he_uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def build_model(config: ModelConfig, rng: np.random.Generator) -> Model:
    """Stack ``depth`` blocks and the dense classification head.

    cnn block:  conv -> batch norm -> ReLU -> max pool
    gcnn block: gated conv (batch-normalized gate) -> max pool
    head:       flatten -> dense -> batch norm -> ReLU -> dropout -> dense -> sigmoid

    A block whose sequence is shorter than 2 skips its pool; a cnn block
    whose input is shorter than the kernel zero-pads it on the right.
    """
    config.validate()
    f, t = config.input_dims
    k, n = config.kernels, config.window
    layers: list[Layer] = []
    shape = (f, t)

    def add(layer):
        nonlocal shape
        layers.append(layer)
        shape = layer.out_shape(shape)

    for _ in range(config.depth):
        c = shape[0]
        fan_in = c * n
        if config.arch == "cnn":
            if shape[1] < n:
                add(RightPad(n))
            add(ConvLayer(_he_uniform(rng, (k, c, n), fan_in), np.zeros(k)))
            add(BatchNormLayer(k))
            add(ReLU())
        else:
            v = _he_uniform(rng, (k, c, n), fan_in)
            w = _he_uniform(rng, (k, c, n), fan_in)
            add(GatedConvLayer(v, np.zeros(k), w, np.zeros(k), gate_norm=BatchNormLayer(k)))
        if shape[1] >= 2:
            add(MaxPoolHalve())
    add(Flatten())
    o = shape[0]
    h = config.hidden
    add(DenseLayer(rng.uniform(-0.05, 0.05, size=(h, o)), np.zeros(h)))
    add(BatchNormLayer(h))
    add(ReLU())
    add(Dropout(config.dropout))
    add(DenseLayer(rng.uniform(-0.05, 0.05, size=(1, h)), np.zeros(1), activation="sigmoid"))
    return Model(config, layers)


def model_forward(x, model: Model, mode=INFER, rng=None):
    """Probabilities ``(B,)`` and the per-layer caches for backprop."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    caches = []
    for layer in model.layers:
        a, cache = layer.forward(a, mode, rng)
        caches.append(cache)
    return a[:, 0], caches


def model_backward(model: Model, caches, p, y, reduction: str = "mean") -> list[np.ndarray]:
    """Gradients of the batch BCE loss for every parameter (build order).

    The output layer's sigmoid is folded into the loss, so its local
    gradient is ``p - y``.
    """
    y = np.asarray(y, dtype=np.float64)
    scale = 1.0 / len(y) if reduction == "mean" else 1.0
    dz = ((p - y) * scale)[:, None]
    last = model.layers[-1]
    x_in, _ = caches[-1]
    last.grads = {"W": dz.T @ x_in, "b": dz.sum(axis=0)}
    d = dz @ last.params["W"]
    for layer, cache in zip(reversed(model.layers[:-1]), reversed(caches[:-1])):
        d = layer.backward(d, cache)
    seen, grads = set(), []
    for layer in model.layers:
        for key, arr in layer.params.items():
            if id(arr) not in seen:
                seen.add(id(arr))
                grads.append(layer.grads[key])
    return grads


def batch_loss(p, y, reduction: str = "mean") -> float:
    losses = bce_loss(p, y)
    total = float(losses.sum() if reduction == "sum" else losses.mean())
    if not np.isfinite(total):
        raise NumericalFailure("non-finite loss")
    return total


def output_head(h, w, b) -> float:
    """Sigmoid output unit ``sigmoid(w . h + b)``."""
    from .layers import sigmoid

    return float(sigmoid(np.dot(w, h) + b))
