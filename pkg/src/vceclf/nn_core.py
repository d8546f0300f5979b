"""A deliberately small differentiable classifier: pooled-pixel features
feeding a linear or one-hidden-layer ReLU head."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data_io import ImageBuffer


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # out x in
    bias: np.ndarray  # out


@dataclass(frozen=True)
class ModelParams:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("a model needs at least one layer")
        for i, layer in enumerate(layers):
            o, n = layer.weight.shape
            if layer.bias.shape != (o,):
                raise ValueError(f"layer {i}: bias shape {layer.bias.shape} does not match {o} outputs")
            if i and layers[i - 1].weight.shape[0] != n:
                raise ValueError(f"layer {i}: input dim {n} != previous output dim {layers[i - 1].weight.shape[0]}")

    @property
    def shapes(self) -> tuple[tuple[int, int], ...]:
        return tuple(layer.weight.shape for layer in self.layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].weight.shape[0]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers])

    @classmethod
    def from_vector(cls, vec, shapes) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        layers, off = [], 0
        for o, n in shapes:
            w = vec[off:off + o * n].reshape(o, n).copy()
            off += o * n
            b = vec[off:off + o].copy()
            off += o
            layers.append(Layer(w, b))
        if off != vec.size:
            raise ValueError(f"vector has {vec.size} values, shapes need {off}")
        return cls(tuple(layers))


_ARCH_RE = re.compile(r"^(linear|mlp):(\d+(?:x\d+)+)$")


def parse_arch(arch: str) -> tuple[str, list[int]]:
    """``linear:192x10`` or ``mlp:192x64x10`` -> (kind, layer dims)."""
    m = _ARCH_RE.match(arch.strip())
    if not m:
        raise ValueError(f"bad architecture descriptor {arch!r} (try 'linear:192x10' or 'mlp:192x64x10')")
    kind = m.group(1)
    dims = [int(d) for d in m.group(2).split("x")]
    if kind == "linear" and len(dims) != 2:
        raise ValueError(f"linear head takes exactly in x out, got {arch!r}")
    if kind == "mlp" and len(dims) != 3:
        raise ValueError(f"mlp takes in x hidden x out, got {arch!r}")
    if min(dims) < 1:
        raise ValueError(f"zero-size layer in {arch!r}")
    return kind, dims


def init_params(arch: str, seed: int) -> ModelParams:
    """Xavier-uniform weights, zero biases."""
    _, dims = parse_arch(arch)
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(Layer(rng.uniform(-limit, limit, size=(fan_out, fan_in)), np.zeros(fan_out)))
    return ModelParams(tuple(layers))


def _pool_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Row j averages input cells by their overlap with [j, j+1) * n_in/n_out."""
    edges = np.arange(n_out + 1) * (n_in / n_out)
    lo = np.arange(n_in)[None, :]
    overlap = np.minimum(edges[1:, None], lo + 1) - np.maximum(edges[:-1, None], lo)
    m = np.clip(overlap, 0.0, None)
    return m / m.sum(axis=1, keepdims=True)


def featurize(img: ImageBuffer, downsample_to: tuple[int, int] = (8, 8)) -> np.ndarray:
    """Area-average pool to (h, w) and flatten channel-major (length 3*h*w)."""
    h, w = downsample_to
    data = img.data
    if (img.height, img.width) == (h, w):
        pooled = data
    else:
        ph = _pool_matrix(h, img.height)
        pw = _pool_matrix(w, img.width)
        rows = np.tensordot(ph, data, axes=(1, 0))  # h x W x 3
        pooled = np.tensordot(rows, pw, axes=(1, 1))  # h x 3 x w
        return np.ascontiguousarray(pooled.transpose(1, 0, 2)).ravel()
    return np.ascontiguousarray(pooled.transpose(2, 0, 1)).ravel()


def _check_batch(params: ModelParams, x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(f"features must be N x {params.in_dim}, got shape {x.shape}")
    return x


def _activations(params: ModelParams, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    last = len(params.layers) - 1
    for i, layer in enumerate(params.layers):
        z = kernels.dense_forward(acts[-1], np.ascontiguousarray(layer.weight), layer.bias)
        acts.append(np.maximum(z, 0.0) if i < last else z)
    return acts


def forward(params: ModelParams, x) -> np.ndarray:
    """Logits for a batch of feature rows; ReLU between layers."""
    return _activations(params, _check_batch(params, x))[-1]


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if np.isnan(z).any():
        raise ValueError("logits contain NaN")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def backward(params: ModelParams, x, dlogits) -> ModelParams:
    """Gradients (summed over the batch) given dL/dlogits."""
    x = _check_batch(params, x)
    delta = np.asarray(dlogits, dtype=np.float64)
    if delta.shape != (x.shape[0], params.n_classes):
        raise ValueError(f"dL/dlogits must be {(x.shape[0], params.n_classes)}, got {delta.shape}")
    acts = _activations(params, x)
    grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        inp = acts[i]
        grads[i] = Layer(delta.T @ inp, delta.sum(axis=0))
        if i:
            delta = (delta @ params.layers[i].weight) * (acts[i] > 0.0)
    return ModelParams(tuple(grads))
