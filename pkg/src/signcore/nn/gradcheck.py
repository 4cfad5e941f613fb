"""Central finite-difference verification of backpropagated gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import Rng
from .layers import DropoutLayer, MaxPoolLayer, ReLU
from .network import Network


def rel_error(a, n, floor=1e-8):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


@dataclass
class GradCheckReport:
    max_rel_err: float
    per_layer: dict[int, float]
    tolerance: float
    n_checked: int
    n_excluded: int
    worst: tuple | None = None
    input_rel_err: float | None = None
    failed_layers: list[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = self.max_rel_err < self.tolerance
        if self.input_rel_err is not None:
            ok = ok and self.input_rel_err < self.tolerance
        return ok


def _signature(net: Network):
    # piecewise-linear regime of the forward pass: ReLU signs and pooling winners
    sig = []
    for layer in net.layers:
        if isinstance(layer, ReLU):
            sig.append(layer._input > 0)
        elif isinstance(layer, MaxPoolLayer):
            sig.append(layer._cache[0].copy())
    return sig


def _same(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(net: Network, image, label: int, step: float = 1e-5, tolerance: float = 1e-4,
               rng: Rng | None = None, check_input: bool = False) -> GradCheckReport:
    """Compare analytic parameter gradients against central differences.

    Dropout masks are drawn once and frozen for the whole check.  A parameter
    is excluded when perturbing it by ``+-step`` flips a ReLU sign or changes
    a pooling winner, since the loss is not differentiable across those.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    rng = rng or Rng(0)
    image = np.asarray(image, dtype=np.float64)
    target = np.array([label])
    for layer in net.layers:
        if isinstance(layer, DropoutLayer):
            layer.mask = None
    net.set_dropout_frozen(True)
    try:
        net.forward(image[None], "training", rng)
        base_sig = _signature(net)
        analytic = net.backward(target)
        analytic_input = net.input_grad[0].copy()

        def loss_at():
            net.forward(image_buf[None], "training", rng)
            loss, _, _ = net.loss_and_grad(target)
            return loss, _same(_signature(net), base_sig)

        image_buf = image.copy()
        per_layer: dict[int, float] = {}
        worst, worst_err = None, 0.0
        checked = excluded = 0
        for idx, layer in enumerate(net.layers):
            for name, p in layer.params.items():
                a_grad = analytic[idx][name]
                flat = p.reshape(-1)
                for k in range(flat.size):
                    orig = flat[k]
                    flat[k] = orig + step
                    lp, ok_p = loss_at()
                    flat[k] = orig - step
                    lm, ok_m = loss_at()
                    flat[k] = orig
                    if not (ok_p and ok_m):
                        excluded += 1
                        continue
                    num = (lp - lm) / (2 * step)
                    err = float(rel_error(a_grad.reshape(-1)[k], num))
                    checked += 1
                    per_layer[idx] = max(per_layer.get(idx, 0.0), err)
                    if err > worst_err:
                        worst, worst_err = (idx, name, k), err
        input_err = None
        if check_input:
            input_err = 0.0
            flat = image_buf.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                lp, ok_p = loss_at()
                flat[k] = orig - step
                lm, ok_m = loss_at()
                flat[k] = orig
                if ok_p and ok_m:
                    num = (lp - lm) / (2 * step)
                    input_err = max(input_err, float(rel_error(analytic_input.reshape(-1)[k], num)))
    finally:
        net.set_dropout_frozen(False)
    failed = [i for i, e in per_layer.items() if e >= tolerance]
    return GradCheckReport(
        max_rel_err=worst_err,
        per_layer=per_layer,
        tolerance=tolerance,
        n_checked=checked,
        n_excluded=excluded,
        worst=worst,
        input_rel_err=input_err,
        failed_layers=sorted(failed),
    )
