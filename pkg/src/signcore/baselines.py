"""K-nearest-neighbour and SVM baselines on flattened pixels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .binio import Reader, Writer


def featurize(sample) -> np.ndarray:
    """Flattened [0, 1] pixels of a sample (or of a bare image array)."""
    image = getattr(sample, "image", sample)
    return np.ascontiguousarray(image, dtype=np.float64).reshape(-1)


def featurize_all(samples) -> tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    x = np.stack([featurize(s) for s in samples]) if samples else np.zeros((0, 0))
    y = np.array([s.class_index for s in samples], dtype=np.int64)
    return x, y


# -------------------------------------------------------------------- KNN

@dataclass
class KnnModel:
    k: int
    features: np.ndarray  # [n, d]
    labels: np.ndarray  # [n]
    n_classes: int
    class_names: list | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        if self.k > len(self.labels):
            raise ValueError(f"k={self.k} exceeds the {len(self.labels)} training points")

    def predict(self, queries) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if q.shape[1] != self.features.shape[1]:
            raise ValueError(f"query length {q.shape[1]} != feature length {self.features.shape[1]}")
        out = np.empty(len(q), dtype=np.int64)
        for r in range(len(q)):
            diff = self.features - q[r]
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            nearest = np.argsort(dist, kind="stable")[: self.k]  # distance ties: insertion order
            out[r] = _vote(self.labels[nearest], dist[nearest], self.n_classes)
        return out


def _vote(labels, dists, n_classes) -> int:
    votes = np.bincount(labels, minlength=n_classes)
    sums = np.bincount(labels, weights=dists, minlength=n_classes)
    top = np.flatnonzero(votes == votes.max())
    # vote ties: smaller summed distance, then lower class index
    return int(top[np.argmin(sums[top])])


def knn_fit(features, labels, k: int = 3, n_classes: int | None = None, class_names=None) -> KnnModel:
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    return KnnModel(k, np.array(features, dtype=np.float64), labels, n_classes, class_names)


def knn_predict(model: KnnModel, query) -> int:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("knn_predict takes a single rank-1 query")
    return int(model.predict(q[None])[0])


# -------------------------------------------------------------------- SVM

@dataclass(frozen=True)
class Kernel:
    name: str = "linear"
    gamma: float = 1.0

    def __post_init__(self):
        if self.name not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.name!r}")
        if self.name == "rbf" and not self.gamma > 0:
            raise ValueError(f"rbf gamma must be positive, got {self.gamma}")

    def matrix(self, a, b) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        if a.shape[1] != b.shape[1]:
            raise ValueError(f"feature lengths differ: {a.shape[1]} vs {b.shape[1]}")
        dot = a @ b.T
        if self.name == "linear":
            return dot
        d2 = np.sum(a * a, axis=1)[:, None] - 2.0 * dot + np.sum(b * b, axis=1)[None, :]
        return np.exp(-self.gamma * np.maximum(d2, 0.0))


def kernel_eval(kernel: Kernel, a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"kernel arguments must be equal-length vectors, got {a.shape} and {b.shape}")
    if kernel.name == "linear":
        return float(a @ b)
    diff = a - b
    return float(np.exp(-kernel.gamma * (diff @ diff)))


def default_gamma(features) -> float:
    """``1 / (n_features * variance of all feature values)``."""
    x = np.asarray(features, dtype=np.float64)
    var = x.var()
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0


@dataclass
class SvmModel:
    """One-vs-rest machines sharing one training set.

    ``alphas[c]`` and ``biases[c]`` define machine ``c`` with labels +1 for
    class ``c`` and -1 otherwise: ``f_c(q) = sum_i alphas[c,i] y_ci k(x_i, q) + b_c``.
    """

    kernel: Kernel
    c_reg: float
    features: np.ndarray
    labels: np.ndarray
    alphas: np.ndarray  # [n_classes, n]
    biases: np.ndarray  # [n_classes]
    iterations: list | None = None
    class_names: list | None = None

    @property
    def n_classes(self) -> int:
        return len(self.biases)

    def signs(self, c: int) -> np.ndarray:
        return np.where(self.labels == c, 1.0, -1.0)

    def decision_function(self, queries) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if q.shape[1] != self.features.shape[1]:
            raise ValueError(f"query length {q.shape[1]} != feature length {self.features.shape[1]}")
        k = self.kernel.matrix(self.features, q)  # [n, m]
        coef = np.stack([self.alphas[c] * self.signs(c) for c in range(self.n_classes)])
        return (coef @ k).T + self.biases[None, :]

    def predict(self, queries) -> np.ndarray:
        return np.argmax(self.decision_function(queries), axis=1)  # ties: lower class index


def svm_fit(features, labels, kernel: Kernel | None = None, c_reg: float = 1.0, tol: float = 1e-3,
            max_passes: int = 50, n_classes: int | None = None, class_names=None) -> SvmModel:
    """Fit one binary SMO machine per class.

    Each machine stops once its maximal KKT violation drops below ``tol`` or
    after ``max_passes * n`` pair updates.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if c_reg <= 0:
        raise ValueError(f"C must be positive, got {c_reg}")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    present = np.unique(y)
    if len(present) < 2:
        raise ValueError("SVM training needs at least two classes")
    kernel = kernel or Kernel("linear")
    gram = np.ascontiguousarray(kernel.matrix(x, x))
    n = len(y)
    alphas = np.zeros((n_classes, n))
    biases = np.zeros(n_classes)
    iterations = []
    for c in range(n_classes):
        signs = np.where(y == c, 1.0, -1.0)
        if not (signs > 0).any():
            # class absent from training data: never predicted
            biases[c] = -np.inf
            iterations.append(0)
            continue
        a, b, it = kernels.smo_solve(gram, signs, float(c_reg), float(tol), int(max_passes) * n)
        alphas[c], biases[c] = a, b
        iterations.append(int(it))
    return SvmModel(kernel, float(c_reg), x.copy(), y.copy(), alphas, biases, iterations, class_names)


def svm_predict(model: SvmModel, query) -> int:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("svm_predict takes a single rank-1 query")
    return int(model.predict(q[None])[0])


def kkt_violations(model: SvmModel, c: int, tol: float) -> dict:
    """Check box, equality and margin conditions of machine ``c`` independently of the solver."""
    a = model.alphas[c]
    s = model.signs(c)
    margin = s * model.decision_function(model.features)[:, c]
    at_upper = np.isclose(a, model.c_reg, rtol=0, atol=1e-12)
    at_zero = a <= 1e-12
    free = ~at_upper & ~at_zero
    return {
        "box": bool(np.all((a >= 0) & (a <= model.c_reg))),
        "equality": float(abs(np.sum(a * s))),
        # alpha = 0 needs margin >= 1; free needs margin == 1; alpha = C needs margin <= 1
        "zero_violation": float(np.max(np.maximum(1 - margin[at_zero], 0.0), initial=0.0)),
        "free_violation": float(np.max(np.abs(margin[free] - 1), initial=0.0)),
        "upper_violation": float(np.max(np.maximum(margin[at_upper] - 1, 0.0), initial=0.0)),
        "margin_violators_not_at_bound": int(np.sum((margin < 1 - tol) & ~at_upper)),
    }


# ----------------------------------------------------------- persistence

KNN_TAG = b"KNN1"
SVM_TAG = b"SVM1"


def dumps_knn(model: KnnModel) -> bytes:
    w = Writer()
    w.header(KNN_TAG)
    n, d = model.features.shape
    w.u32(model.k, model.n_classes, n, d)
    w.strings(model.class_names or [])
    w.array(model.features)
    w.int_array(model.labels)
    return w.getvalue()


def loads_knn(data: bytes) -> KnnModel:
    r = Reader(data)
    r.header(KNN_TAG)
    k, n_classes, n, d = r.u32(4)
    names = r.strings() or None
    feats = r.array((n, d))
    labels = r.int_array(n)
    r.expect_end()
    return KnnModel(k, feats, labels, n_classes, names)


def dumps_svm(model: SvmModel) -> bytes:
    w = Writer()
    w.header(SVM_TAG)
    w.u8(0 if model.kernel.name == "linear" else 1)
    w.f64(model.kernel.gamma)
    w.f64(model.c_reg)
    n, d = model.features.shape
    w.u32(model.n_classes, n, d)
    w.strings(model.class_names or [])
    w.array(model.features)
    w.int_array(model.labels)
    w.array(model.alphas)
    w.array(model.biases)
    return w.getvalue()


def loads_svm(data: bytes) -> SvmModel:
    r = Reader(data)
    r.header(SVM_TAG)
    kind = r.u8()
    gamma = r.f64()
    c_reg = r.f64()
    n_classes, n, d = r.u32(3)
    names = r.strings() or None
    feats = r.array((n, d))
    labels = r.int_array(n)
    alphas = r.array((n_classes, n))
    biases = r.array((n_classes,))
    r.expect_end()
    kernel = Kernel("linear" if kind == 0 else "rbf", gamma)
    return SvmModel(kernel, c_reg, feats, labels, alphas, biases, None, names)
