"""Sequential network with a softmax cross-entropy head."""
from __future__ import annotations

import numpy as np

from ..tensor import Rng
from .layers import (
    ConvLayer,
    DenseLayer,
    DropoutLayer,
    Flatten,
    Layer,
    MaxPoolLayer,
    NNError,
    ReLU,
    softmax_cross_entropy,
)
from .shapes import ShapeError

# Per-layer parameter gradients, indexed like ``Network.layers``.
Gradients = list


def propagate_shapes(layers, input_shape):
    """Per-sample shapes through ``layers``; errors name the failing layer index."""
    shapes = [tuple(input_shape)]
    for idx, layer in enumerate(layers):
        try:
            shapes.append(tuple(layer.output_shape(shapes[-1])))
        except ShapeError as exc:
            raise ShapeError(f"layer {idx} ({layer.kind}): {exc}") from None
    return shapes


class Network:
    """Ordered layers mapping an ``[H, W, C]`` image to ``n_classes`` logits.

    Layer shapes are checked at construction by propagating the shape
    formulas from ``input_shape``; the last layer must emit ``(n_classes,)``.
    """

    def __init__(self, layers: list[Layer], input_shape, n_classes: int, class_names=None):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.n_classes = int(n_classes)
        if class_names is None:
            class_names = [f"c{i:02d}" for i in range(self.n_classes)]
        if len(class_names) != self.n_classes:
            raise ValueError(f"{len(class_names)} class names for {self.n_classes} classes")
        self.class_names = list(class_names)
        self.shapes = propagate_shapes(self.layers, self.input_shape)
        if self.shapes[-1] != (self.n_classes,):
            raise ShapeError(
                f"network emits shape {list(self.shapes[-1])}, expected [{self.n_classes}] logits"
            )
        self._logits = None

    def shape_chain(self):
        """Per-sample shape after each layer (index 0 is the input)."""
        return list(self.shapes)

    def forward(self, x, mode: str = "inference", rng: Rng | None = None):
        """Logits for one image ``[H, W, C]`` or a batch ``[N, H, W, C]``."""
        x = np.asarray(x, dtype=np.float64)
        single = x.shape == self.input_shape
        if single:
            x = x[None]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(
                f"layer 0 ({self.layers[0].kind}): input shape {list(x.shape[1:])} "
                f"does not match network input {list(self.input_shape)}"
            )
        for layer in self.layers:
            x = layer.forward(x, mode, rng)
        self._logits = x if mode == "training" else None
        return x[0] if single else x

    def loss_and_grad(self, targets):
        """Cross-entropy of the cached training logits; returns ``(loss, grad_logits, probs)``."""
        if self._logits is None:
            raise NNError("backward needs a preceding training-mode forward pass")
        return softmax_cross_entropy(self._logits, np.atleast_1d(np.asarray(targets)))

    def backward(self, targets) -> Gradients:
        """Backpropagate the head loss; returns the per-layer parameter gradients.

        The gradient w.r.t. the network input is left in ``self.input_grad``.
        """
        loss, grad, _ = self.loss_and_grad(targets)
        self.last_loss = loss
        return self.backward_from(grad)

    def backward_from(self, grad_logits) -> Gradients:
        grad = grad_logits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        self.input_grad = grad
        return [dict(layer.grads) if layer.params else {} for layer in self.layers]

    def parameters(self):
        return [layer.params for layer in self.layers]

    def n_parameters(self) -> int:
        return sum(p.size for params in self.parameters() for p in params.values())

    def set_dropout_frozen(self, frozen: bool):
        for layer in self.layers:
            if isinstance(layer, DropoutLayer):
                layer.frozen = frozen

    def predict_proba(self, images, batch_size: int = 256):
        images = np.asarray(images, dtype=np.float64)
        single = images.shape == self.input_shape
        if single:
            images = images[None]
        out = []
        for start in range(0, len(images), batch_size):
            logits = self.forward(images[start : start + batch_size], "inference")
            z = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(z)
            out.append(p / p.sum(axis=1, keepdims=True))
        probs = np.concatenate(out) if out else np.zeros((0, self.n_classes))
        return probs[0] if single else probs

    def predict(self, images, batch_size: int = 256):
        """Class indices (argmax of logits, lowest index on ties)."""
        return np.argmax(self.predict_proba(images, batch_size), axis=-1)

    def __repr__(self):
        body = ", ".join(repr(layer) for layer in self.layers)
        return f"Network(input={list(self.input_shape)}, classes={self.n_classes}, [{body}])"


def network_forward(net: Network, image, mode="inference", rng=None):
    return net.forward(image, mode, rng)


def network_backward(net: Network, target_class) -> Gradients:
    return net.backward(target_class)


def build_sign_network(input_shape, n_classes, rng: Rng, class_names=None,
                        conv1: int = 30, conv2: int = 64, kernel: int = 3) -> Network:
    """Two-conv architecture: conv(30, 3x3) > relu > pool(2, s2) > dropout(0.25)
    > conv(64, 3x3) > relu > pool(2, s2) > dropout(0.5) > flatten > dense(C).
    """
    h, w, c = (int(d) for d in input_shape)
    layers: list[Layer] = [
        ConvLayer.init(c, conv1, kernel, rng),
        ReLU(),
        MaxPoolLayer(2, 2),
        DropoutLayer(0.25),
        ConvLayer.init(conv1, conv2, kernel, rng),
        ReLU(),
        MaxPoolLayer(2, 2),
        DropoutLayer(0.5),
        Flatten(),
    ]
    flat = propagate_shapes(layers, (h, w, c))[-1][0]
    layers.append(DenseLayer.init(flat, n_classes, rng))
    return Network(layers, (h, w, c), n_classes, class_names)


def sgd_step(net: Network, grads: Gradients, learning_rate: float) -> Network:
    """In-place ``param -= lr * grad`` for every parameter."""
    if len(grads) != len(net.layers):
        raise ShapeError(f"{len(grads)} gradient entries for {len(net.layers)} layers")
    for idx, (layer, g) in enumerate(zip(net.layers, grads)):
        for name, p in layer.params.items():
            if name not in g or g[name].shape != p.shape:
                raise ShapeError(f"layer {idx}: gradient for {name!r} missing or mis-shaped")
            p -= learning_rate * g[name]
    return net
