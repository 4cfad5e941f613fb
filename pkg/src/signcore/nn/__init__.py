from .gradcheck import GradCheckReport, grad_check
from .layers import (
    ConvLayer,
    DenseLayer,
    DropoutLayer,
    Flatten,
    MaxPoolLayer,
    NNError,
    ReLU,
    softmax_cross_entropy,
)
from .network import (
    Network,
    build_sign_network,
    network_backward,
    network_forward,
    propagate_shapes,
    sgd_step,
)
from .serialize import load_model, save_model
from .shapes import ShapeError, conv_output_size, pool_output_size
from .train import History, Metrics, NumericalError, TrainConfig, evaluate, train

__all__ = [
    "ConvLayer",
    "DenseLayer",
    "DropoutLayer",
    "Flatten",
    "GradCheckReport",
    "History",
    "MaxPoolLayer",
    "Metrics",
    "NNError",
    "Network",
    "NumericalError",
    "ReLU",
    "ShapeError",
    "TrainConfig",
    "build_sign_network",
    "conv_output_size",
    "evaluate",
    "grad_check",
    "load_model",
    "network_backward",
    "network_forward",
    "pool_output_size",
    "propagate_shapes",
    "save_model",
    "sgd_step",
    "softmax_cross_entropy",
    "train",
]
