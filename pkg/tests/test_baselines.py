import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import knn_sort_oracle
from signcore.baselines import (
    Kernel,
    default_gamma,
    dumps_knn,
    dumps_svm,
    featurize,
    featurize_all,
    kernel_eval,
    kkt_violations,
    knn_fit,
    knn_predict,
    loads_knn,
    loads_svm,
    svm_fit,
    svm_predict,
)
from signcore.binio import WrongModelTypeError
from signcore.data import LabeledSample, synth_generate


# ---- features

def test_featurize():
    s = LabeledSample(np.array([[0.0, 1.0], [1.0, 0.0]])[..., None], 0)
    assert featurize(s).tolist() == [0.0, 1.0, 1.0, 0.0]
    img = np.random.default_rng(0).random((3, 4, 2))
    assert featurize(img).shape == (24,)
    assert featurize(img.copy()).tobytes() == featurize(img).tobytes()
    x, y = featurize_all([s, s])
    assert x.shape == (2, 4) and y.tolist() == [0, 0]


# ---- KNN

def test_knn_examples():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [10.0, 10.0], [10.0, 10.0]])
    labels = np.array([0, 0, 1, 1])
    model = knn_fit(pts, labels, k=3)
    assert knn_predict(model, np.array([1.0, 1.0])) == 0
    assert knn_predict(knn_fit(pts, labels, k=1), np.array([10.0, 10.0])) == 1
    with pytest.raises(ValueError):
        knn_fit(pts, labels, k=5)


def test_knn_vote_tie_rules():
    # k=2 with one vote each: the closer class wins
    pts = np.array([[0.0], [3.0]])
    assert knn_predict(knn_fit(pts, np.array([1, 0]), k=2), np.array([1.0])) == 1
    # equal summed distance too: lower class index
    assert knn_predict(knn_fit(pts, np.array([1, 0]), k=2), np.array([1.5])) == 0
    # distance tie at the k boundary: earlier-inserted point wins the slot
    pts = np.array([[-1.0], [1.0], [5.0]])
    assert knn_predict(knn_fit(pts, np.array([2, 1, 0]), k=1), np.array([0.0])) == 2


def test_knn_query_length_checked():
    with pytest.raises(ValueError):
        knn_predict(knn_fit(np.zeros((3, 2)), [0, 1, 0], k=1), np.zeros(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 500), st.integers(1, 4), st.integers(1, 9), st.integers(0, 10_000), st.booleans())
def test_knn_matches_sort_oracle(n, d, k, seed, coarse):
    r = np.random.default_rng(seed)
    k = min(k, n)
    feats = r.integers(0, 3, (n, d)).astype(float) if coarse else r.normal(size=(n, d))
    labels = r.integers(0, 4, n)
    model = knn_fit(feats, labels, k=k, n_classes=4)
    for q in r.normal(size=(3, d)).round(0 if coarse else 6):
        assert knn_predict(model, q) == knn_sort_oracle(feats, labels, q, k)


def test_knn_one_nn_memorises():
    ds = synth_generate(4, 10, 10, seed=1)
    x, y = featurize_all(ds)
    assert np.array_equal(knn_fit(x, y, k=1).predict(x), y)


# ---- kernels

def test_kernel_eval():
    assert kernel_eval(Kernel("linear"), [1.0, 2.0], [3.0, 4.0]) == 11.0
    assert kernel_eval(Kernel("rbf", 0.5), [0.0], [2.0]) == pytest.approx(math.exp(-2), abs=1e-12)
    assert abs(kernel_eval(Kernel("rbf", 0.5), [0.0], [2.0]) - 0.135335) < 1e-6
    x = np.random.default_rng(1).normal(size=5)
    assert kernel_eval(Kernel("rbf", 3.7), x, x) == 1.0
    with pytest.raises(ValueError):
        kernel_eval(Kernel("linear"), [1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Kernel("rbf", 0.0)


def test_kernel_matrix_matches_pointwise(rng):
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    for k in (Kernel("linear"), Kernel("rbf", 0.3)):
        m = k.matrix(a, b)
        for i in range(4):
            for j in range(5):
                assert m[i, j] == pytest.approx(kernel_eval(k, a[i], b[j]), abs=1e-12)


def test_default_gamma():
    x = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert default_gamma(x) == pytest.approx(1 / (2 * 1.0))


# ---- SVM

def test_two_point_linear():
    model = svm_fit(np.array([[-1.0], [1.0]]), np.array([0, 1]), Kernel("linear"), c_reg=1.0)
    for c in range(2):
        a = model.alphas[c]
        assert abs(model.biases[c]) < 1e-3
        assert abs(a[0] - a[1]) < 1e-3
        assert a[0] > 0
    # w = sum alpha y x = 1 for the positive machine
    w = np.sum(model.alphas[1] * model.signs(1) * model.features[:, 0])
    assert w == pytest.approx(1.0, abs=1e-3)
    assert svm_predict(model, np.array([-0.5])) == 0
    assert svm_predict(model, np.array([0.5])) == 1
    assert svm_predict(model, np.array([0.0])) == 0


def test_xor_rbf():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    model = svm_fit(x, y, Kernel("rbf", 1.0), c_reg=1.0)
    assert np.array_equal(model.predict(x), y)
    for i in np.flatnonzero(model.alphas.sum(axis=0) > 0):
        assert svm_predict(model, x[i]) == y[i]
    lin = svm_fit(x, y, Kernel("linear"), c_reg=1.0)
    assert not np.array_equal(lin.predict(x), y)


def test_svm_errors():
    with pytest.raises(ValueError):
        svm_fit(np.zeros((3, 2)), np.array([1, 1, 1]))
    with pytest.raises(ValueError):
        svm_fit(np.eye(2), np.array([0, 1]), c_reg=0.0)
    model = svm_fit(np.eye(2), np.array([0, 1]))
    with pytest.raises(ValueError):
        svm_predict(model, np.zeros(3))


def _random_problem(seed):
    r = np.random.default_rng(seed)
    n, d = int(r.integers(10, 60)), int(r.integers(2, 6))
    n_classes = int(r.integers(2, 4))
    centres = r.normal(0, 2, (n_classes, d))
    y = np.arange(n) % n_classes
    x = centres[y] + r.normal(size=(n, d))
    kernel = Kernel("rbf", float(r.uniform(0.1, 1.0))) if seed % 2 else Kernel("linear")
    return x, y, kernel, float(r.choice([0.1, 1.0, 10.0]))


@pytest.mark.parametrize("seed", range(20))
def test_kkt_conditions(seed):
    x, y, kernel, c_reg = _random_problem(seed)
    tol = 1e-3
    model = svm_fit(x, y, kernel, c_reg=c_reg, tol=tol, max_passes=200)
    for c in range(model.n_classes):
        assert model.iterations[c] < 200 * len(y), "solver hit its iteration cap"
        k = kkt_violations(model, c, tol)
        assert k["box"]
        assert k["equality"] < 1e-6
        assert k["zero_violation"] <= tol
        assert k["free_violation"] <= tol
        assert k["upper_violation"] <= tol
        assert k["margin_violators_not_at_bound"] == 0


@pytest.mark.parametrize("seed", range(5))
def test_permutation_invariance_separable(seed):
    r = np.random.default_rng(seed)
    x = np.concatenate([r.normal(-3, 0.5, (15, 2)), r.normal(3, 0.5, (15, 2))])
    y = np.repeat([0, 1], 15)
    perm = r.permutation(30)
    q = r.normal(0, 3, (20, 2))
    # a loose tol stops at a path-dependent point; the optimum itself is order-free
    for kernel in (Kernel("linear"), Kernel("rbf", 0.5)):
        a = svm_fit(x, y, kernel, tol=1e-10, max_passes=500).decision_function(q)
        b = svm_fit(x[perm], y[perm], kernel, tol=1e-10, max_passes=500).decision_function(q)
        assert np.max(np.abs(a - b)) < 1e-8


def test_absent_class_never_predicted():
    model = svm_fit(np.array([[0.0], [1.0]]), np.array([0, 2]), n_classes=3)
    assert model.biases[1] == -np.inf
    assert set(model.predict(np.linspace(-2, 3, 11)[:, None]).tolist()) <= {0, 2}


# ---- persistence

def test_knn_roundtrip():
    r = np.random.default_rng(3)
    model = knn_fit(r.normal(size=(20, 4)), r.integers(0, 3, 20), k=3, n_classes=3, class_names=["a", "b", "c"])
    back = loads_knn(dumps_knn(model))
    q = r.normal(size=(10, 4))
    assert np.array_equal(back.predict(q), model.predict(q))
    assert back.class_names == ["a", "b", "c"]
    with pytest.raises(WrongModelTypeError):
        loads_svm(dumps_knn(model))


def test_svm_roundtrip():
    x, y, kernel, c_reg = _random_problem(1)
    model = svm_fit(x, y, kernel, c_reg=c_reg)
    back = loads_svm(dumps_svm(model))
    assert back.kernel == model.kernel
    assert np.array_equal(back.decision_function(x), model.decision_function(x))
