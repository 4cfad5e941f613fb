"""Network layers with explicit forward/backward passes.

Layers work on batches: images are ``[N, H, W, C]`` and vectors ``[N, D]``.
Conv, pool and dense layers also accept a single unbatched sample and
return an unbatched result.  Parameter gradients from the last backward call
live in ``layer.grads`` under the same keys as ``layer.params``.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..tensor import Rng
from .shapes import ShapeError, conv_output_size, pool_output_size


class NNError(RuntimeError):
    pass


class Layer:
    kind = "layer"
    sample_ndim = None  # rank of one unbatched sample, when unambiguous

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._single = False

    def output_shape(self, in_shape: tuple) -> tuple:
        return tuple(in_shape)

    def _batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._single = self.sample_ndim is not None and x.ndim == self.sample_ndim
        return x[None] if self._single else x

    def _unbatch(self, y):
        return y[0] if self._single else y

    def forward(self, x, mode: str = "inference", rng: Rng | None = None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class ConvLayer(Layer):
    """2-D cross-correlation, ``out[i,j,o] = b[o] + sum x_pad[i*s+m, j*s+n, c] * K[o,c,m,n]``.

    Implemented as im2col followed by one matrix product.
    """

    kind = "conv"
    sample_ndim = 3

    def __init__(self, kernels_: np.ndarray, bias: np.ndarray, stride: int = 1, padding: int = 0):
        super().__init__()
        kernels_ = np.asarray(kernels_, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if kernels_.ndim != 4:
            raise ShapeError(f"kernel bank must be [OutC, InC, Kh, Kw], got {kernels_.shape}")
        if bias.shape != (kernels_.shape[0],):
            raise ShapeError(f"bias shape {bias.shape} does not match {kernels_.shape[0]} kernels")
        if stride < 1 or padding < 0:
            raise ShapeError(f"invalid stride {stride} / padding {padding}")
        self.params = {"kernels": kernels_, "bias": bias}
        self.stride = int(stride)
        self.padding = int(padding)
        self._cache = None

    @classmethod
    def init(cls, in_channels, out_channels, size, rng: Rng, stride=1, padding=0):
        """He-normal kernels (std sqrt(2 / fan_in)), zero bias."""
        fan_in = in_channels * size * size
        k = rng.normal(0.0, np.sqrt(2.0 / fan_in), (out_channels, in_channels, size, size))
        return cls(k, np.zeros(out_channels), stride, padding)

    @property
    def kernels(self):
        return self.params["kernels"]

    @property
    def bias(self):
        return self.params["bias"]

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"conv expects [H, W, C] input, got {list(in_shape)}")
        h, w, c = in_shape
        out_c, in_c, kh, kw = self.kernels.shape
        if c != in_c:
            raise ShapeError(f"conv expects {in_c} input channels, got {c}")
        return (
            conv_output_size(h, kh, self.padding, self.stride, "height"),
            conv_output_size(w, kw, self.padding, self.stride, "width"),
            out_c,
        )

    def forward(self, x, mode="inference", rng=None):
        x = self._batch(x)
        out_h, out_w, out_c = self.output_shape(x.shape[1:])
        _, _, kh, kw = self.kernels.shape
        p = self.padding
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else np.ascontiguousarray(x)
        cols = kernels.im2col(xp, kh, kw, self.stride, out_h, out_w)
        out = cols @ self.kernels.reshape(out_c, -1).T + self.bias
        out_shape = (x.shape[0], out_h, out_w, out_c)
        self._cache = (cols, xp.shape, out_shape)
        return self._unbatch(out.reshape(out_shape))

    def backward(self, grad):
        if self._cache is None:
            raise NNError("conv backward called before forward")
        cols, padded_shape, out_shape = self._cache
        single = self._single
        grad = np.asarray(grad, dtype=np.float64)
        if single:
            grad = grad[None]
        if grad.shape != out_shape:
            raise ShapeError(f"upstream gradient shape {grad.shape} does not match conv output {out_shape}")
        out_c, _, kh, kw = self.kernels.shape
        out_h, out_w = out_shape[1:3]
        g2 = grad.reshape(-1, out_c)
        self.grads = {
            "kernels": (g2.T @ cols).reshape(self.kernels.shape),
            "bias": g2.sum(axis=0),
        }
        dcols = g2 @ self.kernels.reshape(out_c, -1)
        dxp = kernels.col2im(dcols, padded_shape, kh, kw, self.stride, out_h, out_w)
        p = self.padding
        dx = dxp[:, p : padded_shape[1] - p, p : padded_shape[2] - p, :] if p else dxp
        return dx[0] if single else dx

    def __repr__(self):
        o, i, kh, kw = self.kernels.shape
        return f"ConvLayer({o} x {i}x{kh}x{kw}, stride={self.stride}, padding={self.padding})"


class MaxPoolLayer(Layer):
    """Square max pooling; gradients route to the first (row-major) maximum."""

    kind = "maxpool"
    sample_ndim = 3

    def __init__(self, window: int = 2, stride: int = 2):
        super().__init__()
        if window < 1 or stride < 1:
            raise ShapeError(f"invalid pool window {window} / stride {stride}")
        self.window = int(window)
        self.stride = int(stride)
        self._cache = None

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"maxpool expects [H, W, C] input, got {list(in_shape)}")
        h, w, c = in_shape
        return (
            pool_output_size(h, self.window, self.stride, "height"),
            pool_output_size(w, self.window, self.stride, "width"),
            c,
        )

    def forward(self, x, mode="inference", rng=None):
        x = self._batch(x)
        out_h, out_w, _ = self.output_shape(x.shape[1:])
        out, arg = kernels.maxpool_forward(np.ascontiguousarray(x), self.window, self.stride, out_h, out_w)
        self._cache = (arg, x.shape)
        return self._unbatch(out)

    def backward(self, grad):
        if self._cache is None:
            raise NNError("maxpool backward called before forward")
        arg, in_shape = self._cache
        grad = np.asarray(grad, dtype=np.float64)
        if self._single:
            grad = grad[None]
        if grad.shape != arg.shape:
            raise ShapeError(f"upstream gradient shape {grad.shape} does not match pool output {arg.shape}")
        dx = kernels.maxpool_backward(np.ascontiguousarray(grad), arg, in_shape, self.window, self.stride)
        return dx[0] if self._single else dx

    def __repr__(self):
        return f"MaxPoolLayer(window={self.window}, stride={self.stride})"


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, mode="inference", rng=None):
        x = np.asarray(x, dtype=np.float64)
        self._input = x
        return np.maximum(x, 0.0)

    def backward(self, grad):
        if getattr(self, "_input", None) is None:
            raise NNError("relu backward called before forward")
        return np.where(self._input > 0, grad, 0.0)


class DropoutLayer(Layer):
    """Inverted dropout.

    In training mode each unit is kept with probability ``1 - rate`` and kept
    values are scaled by ``1 / (1 - rate)``; inference mode is the identity.
    With ``frozen`` set, the cached mask is reused instead of redrawn.
    """

    kind = "dropout"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)
        self.mask = None
        self.frozen = False

    def forward(self, x, mode="inference", rng=None):
        x = np.asarray(x, dtype=np.float64)
        if mode != "training":
            return x
        if self.frozen and self.mask is not None and self.mask.shape == x.shape:
            return x * self.mask
        if self.rate == 0.0:
            self.mask = np.ones_like(x)
        else:
            if rng is None:
                raise NNError("training-mode dropout needs an Rng")
            keep = rng.random(x.shape) >= self.rate
            self.mask = keep / (1.0 - self.rate)
        return x * self.mask

    def backward(self, grad):
        if self.mask is None:
            raise NNError("dropout backward called without a cached training mask")
        return grad * self.mask

    def __repr__(self):
        return f"DropoutLayer(rate={self.rate})"


class Flatten(Layer):
    """Collapse every axis after the batch axis, preserving row-major order."""

    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, mode="inference", rng=None):
        x = np.asarray(x, dtype=np.float64)
        self._in_shape = x.shape
        return np.ascontiguousarray(x).reshape(x.shape[0], -1)

    def backward(self, grad):
        return np.asarray(grad).reshape(self._in_shape)


class DenseLayer(Layer):
    """Fully connected layer, ``z = W x + b`` with ``W`` shaped [Out, In]."""

    kind = "dense"
    sample_ndim = 1

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        super().__init__()
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ShapeError(f"dense weights {weights.shape} / bias {bias.shape} mismatch")
        self.params = {"weights": weights, "bias": bias}
        self._input = None

    @classmethod
    def init(cls, in_features, out_features, rng: Rng):
        w = rng.normal(0.0, np.sqrt(2.0 / in_features), (out_features, in_features))
        return cls(w, np.zeros(out_features))

    @property
    def weights(self):
        return self.params["weights"]

    @property
    def bias(self):
        return self.params["bias"]

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.weights.shape[1],):
            raise ShapeError(f"dense expects input of length {self.weights.shape[1]}, got {list(in_shape)}")
        return (self.weights.shape[0],)

    def forward(self, x, mode="inference", rng=None):
        x = self._batch(x)
        if x.ndim != 2 or x.shape[1] != self.weights.shape[1]:
            raise ShapeError(f"dense expects input of length {self.weights.shape[1]}, got shape {x.shape}")
        self._input = x
        return self._unbatch(x @ self.weights.T + self.bias)

    def backward(self, grad):
        if self._input is None:
            raise NNError("dense backward called before forward")
        grad = np.asarray(grad, dtype=np.float64)
        if self._single:
            grad = grad[None]
        if grad.shape != (self._input.shape[0], self.weights.shape[0]):
            raise ShapeError(f"upstream gradient shape {grad.shape} does not match dense output")
        self.grads = {"weights": grad.T @ self._input, "bias": grad.sum(axis=0)}
        dx = grad @ self.weights
        return dx[0] if self._single else dx

    def __repr__(self):
        return f"DenseLayer({self.weights.shape[1]} -> {self.weights.shape[0]})"


def softmax_cross_entropy(logits, target):
    """Softmax probabilities, cross-entropy loss and its gradient w.r.t. the logits.

    ``logits`` is ``[C]`` with an integer target, or ``[N, C]`` with ``N``
    targets, in which case the loss and gradient are averaged over the batch.
    Returns ``(loss, grad_logits, probs)``.
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None]
    t = np.atleast_1d(np.asarray(target))
    n, c = z.shape
    if t.shape != (n,) or not np.issubdtype(t.dtype, np.integer):
        raise ValueError(f"need {n} integer targets, got {target!r}")
    if np.any(t < 0) or np.any(t >= c):
        raise ValueError(f"target class out of range [0, {c})")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    probs = np.exp(log_probs)
    rows = np.arange(n)
    loss = float(-log_probs[rows, t].mean())
    grad = probs.copy()
    grad[rows, t] -= 1.0
    grad /= n
    if single:
        return loss, grad[0], probs[0]
    return loss, grad, probs
