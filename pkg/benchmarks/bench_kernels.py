"""Time the numba and numpy kernel backends on training-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat N] [--epoch]

``--epoch`` also times one training epoch of the desk-scale network under
each backend (each in a subprocess, since the backend is fixed at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from signcore.kernels import _numba as nbk
from signcore.kernels import _numpy as npk


def cases():
    r = np.random.default_rng(0)
    x1 = r.random((32, 28, 28, 1))
    x2 = r.random((32, 13, 13, 30))
    pool_in = r.random((32, 26, 26, 30))
    cols2 = npk.im2col(x2, 3, 3, 1, 11, 11)
    _, arg = npk.maxpool_forward(pool_in, 2, 2, 13, 13)
    grad_pool = r.random((32, 13, 13, 30))
    img = r.random((28, 28, 1))
    rot = np.array([0.9, -0.4, 4.0, 0.4, 0.9, -3.0])
    feats = r.random((400, 784))
    gram = feats @ feats.T
    y = np.where(np.arange(400) % 10 == 0, 1.0, -1.0)
    return {
        "im2col conv1 [32,28,28,1] k3": lambda m: m.im2col(x1, 3, 3, 1, 26, 26),
        "im2col conv2 [32,13,13,30] k3": lambda m: m.im2col(x2, 3, 3, 1, 11, 11),
        "col2im conv2": lambda m: m.col2im(cols2, x2.shape, 3, 3, 1, 11, 11),
        "maxpool fwd [32,26,26,30]": lambda m: m.maxpool_forward(pool_in, 2, 2, 13, 13),
        "maxpool bwd": lambda m: m.maxpool_backward(grad_pool, arg, pool_in.shape, 2, 2),
        "warp 28x28 x100": lambda m: [m.warp_bilinear(img, 28, 28, rot, False) for _ in range(100)],
        "smo linear n=400": lambda m: m.smo_solve(gram, y, 1.0, 1e-3, 4000),
    }


EPOCH_SNIPPET = """
import time
from signcore import BACKEND
from signcore.data import synth_generate
from signcore.nn import TrainConfig, build_sign_network, train
from signcore.tensor import Rng
ds = synth_generate(10, 80, 28, seed=7)
net = build_sign_network((28, 28, 1), 10, Rng(0))
train(net, ds, TrainConfig(epochs=1))  # warm-up (JIT compile / caches)
t = time.perf_counter()
train(net, ds, TrainConfig(epochs=1))
print(BACKEND, time.perf_counter() - t)
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--epoch", action="store_true", help="also time one training epoch per backend")
    args = ap.parse_args()

    print(f"{'kernel':<32}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, fn in cases().items():
        fn(nbk)  # compile outside the timed region
        t_nb = min(timeit.repeat(lambda: fn(nbk), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: fn(npk), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<32}{t_nb:>10.2f}{t_np:>10.2f}{t_np / t_nb:>8.1f}x")

    if args.epoch:
        print("\none epoch, 800 images 28x28:")
        for flag in ("1", "0"):
            env = dict(os.environ, SIGNCORE_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET], env=env, capture_output=True, text=True, check=True)
            backend, secs = out.stdout.split()
            print(f"  {backend:<6} {float(secs):.2f} s")


if __name__ == "__main__":
    main()
