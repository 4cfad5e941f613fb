import numpy as np

from signcore.nn import ConvLayer, DenseLayer, DropoutLayer, Flatten, MaxPoolLayer, Network, ReLU
from signcore.tensor import Rng


def small_network(seed, in_shape=(6, 6, 2), conv_out=3, k=3, n_classes=4, dropout=0.25, pool=2):
    """conv > relu > pool > dropout > flatten > dense, randomly initialised."""
    r = Rng(seed)
    h, w, c = in_shape
    layers = [
        ConvLayer.init(c, conv_out, k, r),
        ReLU(),
        MaxPoolLayer(pool, pool),
        DropoutLayer(dropout),
        Flatten(),
    ]
    oh = ((h - k + 1) - pool) // pool + 1
    ow = ((w - k + 1) - pool) // pool + 1
    layers.append(DenseLayer.init(oh * ow * conv_out, n_classes, r))
    # nonzero biases so no unit sits exactly at a kink
    for layer in layers:
        if "bias" in layer.params:
            layer.params["bias"][:] = r.normal(0, 0.1, layer.params["bias"].shape)
    return Network(layers, in_shape, n_classes)


# acceptance lines, printed by conftest in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def criterion(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])
    assert ok, detail
