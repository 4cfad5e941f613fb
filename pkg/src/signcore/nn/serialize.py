"""Network (de)serialisation in the ``ASLM``/``CNN1`` binary format.

After the common header::

    u32 H, W, C, n_classes
    strings class_names          (u32 count, then u16 length + UTF-8 each)
    u32 n_layers
    per layer: u8 kind, then
      1 conv     u32 out_c, in_c, kh, kw, stride, padding; f64 kernels; f64 bias
      2 maxpool  u32 window, stride
      3 relu
      4 dropout  f64 rate
      5 flatten
      6 dense    u32 out, in; f64 weights; f64 bias

All integers are unsigned little-endian, all reals IEEE-754 binary64
little-endian, arrays row-major.
"""
from __future__ import annotations

import os

from ..binio import ModelFormatError, Reader, Writer
from .layers import ConvLayer, DenseLayer, DropoutLayer, Flatten, MaxPoolLayer, ReLU
from .network import Network

TAG = b"CNN1"
KIND_CONV, KIND_POOL, KIND_RELU, KIND_DROPOUT, KIND_FLATTEN, KIND_DENSE = range(1, 7)


def dumps(net: Network) -> bytes:
    w = Writer()
    w.header(TAG)
    w.u32(*net.input_shape, net.n_classes)
    w.strings(net.class_names)
    w.u32(len(net.layers))
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            w.u8(KIND_CONV)
            w.u32(*layer.kernels.shape, layer.stride, layer.padding)
            w.array(layer.kernels)
            w.array(layer.bias)
        elif isinstance(layer, MaxPoolLayer):
            w.u8(KIND_POOL)
            w.u32(layer.window, layer.stride)
        elif isinstance(layer, ReLU):
            w.u8(KIND_RELU)
        elif isinstance(layer, DropoutLayer):
            w.u8(KIND_DROPOUT)
            w.f64(layer.rate)
        elif isinstance(layer, Flatten):
            w.u8(KIND_FLATTEN)
        elif isinstance(layer, DenseLayer):
            w.u8(KIND_DENSE)
            w.u32(*layer.weights.shape)
            w.array(layer.weights)
            w.array(layer.bias)
        else:
            raise TypeError(f"cannot serialise layer {layer!r}")
    return w.getvalue()


def loads(data: bytes) -> Network:
    r = Reader(data)
    r.header(TAG)
    h, w, c, n_classes = r.u32(4)
    names = r.strings()
    layers = []
    for _ in range(r.u32()):
        kind = r.u8()
        if kind == KIND_CONV:
            o, i, kh, kw, stride, padding = r.u32(6)
            k = r.array((o, i, kh, kw))
            layers.append(ConvLayer(k, r.array((o,)), stride, padding))
        elif kind == KIND_POOL:
            layers.append(MaxPoolLayer(*r.u32(2)))
        elif kind == KIND_RELU:
            layers.append(ReLU())
        elif kind == KIND_DROPOUT:
            layers.append(DropoutLayer(r.f64()))
        elif kind == KIND_FLATTEN:
            layers.append(Flatten())
        elif kind == KIND_DENSE:
            o, i = r.u32(2)
            wts = r.array((o, i))
            layers.append(DenseLayer(wts, r.array((o,))))
        else:
            raise ModelFormatError(f"unknown layer kind {kind}")
    r.expect_end()
    return Network(layers, (h, w, c), n_classes, names)


def save_model(net: Network, path) -> None:
    data = dumps(net)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_model(path) -> Network:
    with open(path, "rb") as fh:
        return loads(fh.read())
