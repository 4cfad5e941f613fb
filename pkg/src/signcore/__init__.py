"""From-scratch CNN, KNN and SVM classification of hand-sign images."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
