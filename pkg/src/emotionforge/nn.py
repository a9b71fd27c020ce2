"""The network: layer primitives with exact backward passes, and EMO-NET.

Tensors are plain numpy arrays, row-major. Production runs in float32; every
primitive also works in float64, which the gradient checker uses for its
finite-difference oracle. Weight layouts: conv ``(out_ch, in_ch, kh, kw)``
(cross-correlation, zero padding), fully-connected ``(out_dim, in_dim)``
with ``y = x @ W.T + b``.

EMO-NET, the compact VGG-style stack used throughout (input 1x128x128):

    conv 5x5x32 /2 p2 - relu - maxpool 2x2
    conv 3x3x64 p1    - relu - maxpool 2x2
    conv 3x3x128 p1   - relu - maxpool 2x2
    flatten (8192) - fc 256 - relu - dropout 0.5 - fc 7

2,192,391 parameters; about 8.8 MB as float32. ``emo_net_layers`` also
builds reduced-resolution clones (any input size whose spatial ladder stays
even until the last pool) for cheap gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import (
    NonFiniteActivationError,
    ShapeMismatchError,
    StaleCacheError,
)
from .rng import Prng

NUM_CLASSES = 7
DROPOUT_P = 0.5

CONV, RELU, MAXPOOL, FLATTEN, FC, DROPOUT = "conv", "relu", "maxpool", "flatten", "fc", "dropout"


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_ch: int = 0
    out_ch: int = 0
    kh: int = 0
    kw: int = 0
    stride: int = 0
    pad: int = 0
    in_dim: int = 0
    out_dim: int = 0

    @property
    def parametric(self) -> bool:
        return self.kind in (CONV, FC)


@dataclass
class ModelParams:
    layers: list[LayerSpec]
    weights: list[np.ndarray]  # one per parametric layer, in network order
    biases: list[np.ndarray]
    mode: str = "classification"  # head semantics: classification | regression

    def copy(self) -> "ModelParams":
        return ModelParams(layers=list(self.layers),
                           weights=[w.copy() for w in self.weights],
                           biases=[b.copy() for b in self.biases],
                           mode=self.mode)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(layers=list(self.layers),
                           weights=[w.astype(dtype) for w in self.weights],
                           biases=[b.astype(dtype) for b in self.biases],
                           mode=self.mode)

    @property
    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def conv_out_hw(h: int, w: int, spec: LayerSpec) -> tuple[int, int]:
    ho = (h + 2 * spec.pad - spec.kh) // spec.stride + 1
    wo = (w + 2 * spec.pad - spec.kw) // spec.stride + 1
    return ho, wo


def emo_net_layers(input_hw: int = 128) -> list[LayerSpec]:
    """The EMO-NET stack for a square 1-channel input of side ``input_hw``."""
    convs = [LayerSpec(CONV, in_ch=1, out_ch=32, kh=5, kw=5, stride=2, pad=2),
             LayerSpec(CONV, in_ch=32, out_ch=64, kh=3, kw=3, stride=1, pad=1),
             LayerSpec(CONV, in_ch=64, out_ch=128, kh=3, kw=3, stride=1, pad=1)]
    layers: list[LayerSpec] = []
    hw = input_hw
    for c in convs:
        layers += [c, LayerSpec(RELU), LayerSpec(MAXPOOL)]
        hw, _ = conv_out_hw(hw, hw, c)
        if hw % 2 != 0:
            raise ShapeMismatchError(f"input {input_hw}: spatial size {hw} not poolable")
        hw //= 2
    flat = 128 * hw * hw
    layers += [LayerSpec(FLATTEN),
               LayerSpec(FC, in_dim=flat, out_dim=256),
               LayerSpec(RELU),
               LayerSpec(DROPOUT),
               LayerSpec(FC, in_dim=256, out_dim=NUM_CLASSES)]
    return layers


def init_params(seed: int, input_hw: int = 128, mode: str = "classification") -> ModelParams:
    """He-normal weights (std sqrt(2/fan_in)), zero biases, deterministic."""
    rng = Prng.derive(seed, 0)
    weights, biases = [], []
    for spec in emo_net_layers(input_hw):
        if spec.kind == CONV:
            fan_in = spec.in_ch * spec.kh * spec.kw
            shape = (spec.out_ch, spec.in_ch, spec.kh, spec.kw)
            nbias = spec.out_ch
        elif spec.kind == FC:
            fan_in = spec.in_dim
            shape = (spec.out_dim, spec.in_dim)
            nbias = spec.out_dim
        else:
            continue
        std = np.sqrt(2.0 / fan_in)
        weights.append((rng.normal(int(np.prod(shape))) * std).reshape(shape).astype(np.float32))
        biases.append(np.zeros(nbias, dtype=np.float32))
    return ModelParams(layers=emo_net_layers(input_hw), weights=weights, biases=biases, mode=mode)


# --- layer primitives ----------------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """(N, C*kh*kw, ho*wo) patch matrix from a padded (N, C, H, W) input."""
    n, c, _, _ = xp.shape
    sn, sc, sh, sw = xp.strides
    win = as_strided(xp, shape=(n, c, kh, kw, ho, wo),
                     strides=(sn, sc, sh, sw, stride * sh, stride * sw))
    return win.reshape(n, c * kh * kw, ho * wo)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                   stride: int, pad: int) -> np.ndarray:
    """Cross-correlation plus bias; zero padding."""
    n, c, h, wd = x.shape
    k, cw, kh, kw = w.shape
    if c != cw:
        raise ShapeMismatchError(f"input has {c} channels, kernel expects {cw}")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatchError(f"kernel {kh}x{kw} does not fit {h}x{wd} input")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    y = np.matmul(w.reshape(k, -1), cols)          # (N, K, ho*wo)
    y += b.reshape(1, k, 1)
    return y.reshape(n, k, ho, wo)


def conv2d_backward(x: np.ndarray, w: np.ndarray, upstream: np.ndarray,
                    stride: int, pad: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) of conv2d_forward."""
    n, c, h, wd = x.shape
    k, _, kh, kw = w.shape
    _, ku, ho, wo = upstream.shape
    if ku != k or upstream.shape[0] != n:
        raise ShapeMismatchError("upstream shape does not match forward output")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    up = upstream.reshape(n, k, ho * wo)

    dw = np.tensordot(up, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
    db = upstream.sum(axis=(0, 2, 3))
    dcols = np.matmul(w.reshape(k, -1).T, up)      # (N, C*kh*kw, ho*wo)
    dcols = dcols.reshape(n, c, kh, kw, ho, wo)

    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * ho : stride,
                j : j + stride * wo : stride] += dcols[:, :, i, j]
    if pad:
        return dxp[:, :, pad : pad + h, pad : pad + wd], dw, db
    return dxp, dw, db


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return upstream * (x > 0)  # subgradient 0 at 0


def maxpool_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 stride-2 max pooling; returns (output, argmax per window).

    Window values are scanned row-major, so argmax's first-match rule pins
    ties to the earliest position.
    """
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatchError(f"maxpool needs even spatial dims, got {h}x{w}")
    win = (x.reshape(n, c, h // 2, 2, w // 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h // 2, w // 2, 4))
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(x_shape: tuple, idx: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    n, c, h, w = x_shape
    dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=upstream.dtype)
    np.put_along_axis(dwin, idx[..., None], upstream[..., None], axis=-1)
    return (dwin.reshape(n, c, h // 2, w // 2, 2, 2)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(n, c, h, w))


def fc_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatchError(f"fc input dim {x.shape[1]} != weight in_dim {w.shape[1]}")
    return x @ w.T + b


def fc_backward(x: np.ndarray, w: np.ndarray, upstream: np.ndarray):
    return upstream @ w, upstream.T @ x, upstream.sum(axis=0)


def dropout_forward(x: np.ndarray, p: float, rng: Prng) -> tuple[np.ndarray, np.ndarray]:
    """Inverted dropout: kept activations scaled by 1/(1-p)."""
    mask = (rng.uniform(x.size) >= p).reshape(x.shape)
    return x * mask / (1.0 - p), mask


def dropout_backward(mask: np.ndarray, p: float, upstream: np.ndarray) -> np.ndarray:
    return upstream * mask / (1.0 - p)


# --- whole-network passes --------------------------------------------------------

def forward(params: ModelParams, x: np.ndarray, mode: str = "infer",
            rng: Prng | None = None):
    """Run the stack. ``mode='train'`` returns (logits, caches) for backward;
    ``mode='infer'`` returns logits and skips dropout.

    Dropout fires only in train mode *and* when an rng is supplied; gradient
    checking passes ``rng=None`` to keep the path deterministic.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be train or infer, got {mode!r}")
    first = params.layers[0]
    if x.ndim != 4 or x.shape[1] != first.in_ch:
        raise ShapeMismatchError(f"input shape {x.shape} does not fit first conv "
                                 f"(need (N, {first.in_ch}, H, W))")
    caches = []
    pi = 0  # parametric layer cursor
    for spec in params.layers:
        if spec.kind == CONV:
            w, b = params.weights[pi], params.biases[pi]
            caches.append((spec, x))
            x = conv2d_forward(x, w, b, spec.stride, spec.pad)
            pi += 1
        elif spec.kind == RELU:
            caches.append((spec, x))
            x = relu_forward(x)
        elif spec.kind == MAXPOOL:
            x_shape = x.shape
            x, idx = maxpool_forward(x)
            caches.append((spec, (x_shape, idx)))
        elif spec.kind == FLATTEN:
            caches.append((spec, x.shape))
            x = x.reshape(x.shape[0], -1)
        elif spec.kind == FC:
            w, b = params.weights[pi], params.biases[pi]
            caches.append((spec, x))
            x = fc_forward(x, w, b)
            pi += 1
        elif spec.kind == DROPOUT:
            if mode == "train" and rng is not None:
                x, mask = dropout_forward(x, DROPOUT_P, rng)
                caches.append((spec, mask))
            else:
                caches.append((spec, None))
        else:
            raise ValueError(f"unknown layer kind {spec.kind!r}")
    if not np.isfinite(x).all():
        raise NonFiniteActivationError("non-finite logits")
    if mode == "train":
        return x, caches
    return x


def forward_frozen(params: ModelParams, x: np.ndarray, caches: list) -> np.ndarray:
    """Evaluate the network with routing decisions frozen from ``caches``.

    ReLU masks and maxpool argmax indices are held at the values recorded by
    a train-mode forward; dropout is identity. The result is the local
    linearization whose exact gradient backward computes — the function a
    finite-difference oracle must probe for the comparison to be meaningful
    at step sizes that would otherwise cross ReLU kinks.
    """
    pi = 0
    for spec, cache in caches:
        if spec.kind == CONV:
            x = conv2d_forward(x, params.weights[pi], params.biases[pi],
                               spec.stride, spec.pad)
            pi += 1
        elif spec.kind == RELU:
            x = x * (cache > 0)
        elif spec.kind == MAXPOOL:
            n, c, h, w = x.shape
            win = (x.reshape(n, c, h // 2, 2, w // 2, 2)
                    .transpose(0, 1, 2, 4, 3, 5)
                    .reshape(n, c, h // 2, w // 2, 4))
            idx = cache[1]
            x = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        elif spec.kind == FLATTEN:
            x = x.reshape(x.shape[0], -1)
        elif spec.kind == FC:
            x = fc_forward(x, params.weights[pi], params.biases[pi])
            pi += 1
        elif spec.kind == DROPOUT:
            pass
    return x


def backward(params: ModelParams, caches: list, dlogits: np.ndarray):
    """Gradients w.r.t. every weight and bias, given dLoss/dlogits.

    Returns (dweights, dbiases) shaped exactly like params.weights/biases.
    """
    if len(caches) != len(params.layers):
        raise StaleCacheError("cache count does not match layer count")
    last_fc = params.layers[-1]
    if dlogits.ndim != 2 or dlogits.shape[1] != last_fc.out_dim:
        raise StaleCacheError(f"dlogits shape {dlogits.shape} does not match head")
    dweights = [None] * len(params.weights)
    dbiases = [None] * len(params.biases)
    pi = len(params.weights)
    dx = dlogits
    for spec, cache in reversed(caches):
        if spec.kind == CONV:
            pi -= 1
            x = cache
            if x.shape[0] != dx.shape[0]:
                raise StaleCacheError("batch size changed between forward and backward")
            dx, dw, db = conv2d_backward(x, params.weights[pi], dx, spec.stride, spec.pad)
            dweights[pi], dbiases[pi] = dw, db
        elif spec.kind == RELU:
            dx = relu_backward(cache, dx)
        elif spec.kind == MAXPOOL:
            x_shape, idx = cache
            dx = maxpool_backward(x_shape, idx, dx)
        elif spec.kind == FLATTEN:
            dx = dx.reshape(cache)
        elif spec.kind == FC:
            pi -= 1
            x = cache
            if x.shape[0] != dx.shape[0]:
                raise StaleCacheError("batch size changed between forward and backward")
            dx, dw, db = fc_backward(x, params.weights[pi], dx)
            dweights[pi], dbiases[pi] = dw, db
        elif spec.kind == DROPOUT:
            if cache is not None:
                dx = dropout_backward(cache, DROPOUT_P, dx)
    return dweights, dbiases
