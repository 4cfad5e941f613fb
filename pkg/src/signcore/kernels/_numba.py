"""Loop kernels compiled with numba.

Every function here has a twin with the same signature in ``_numpy``.
Arrays are float64, row-major, images in [N, H, W, C] order.
"""
import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def im2col(x, kh, kw, stride, out_h, out_w):
    # x: padded input [N, Hp, Wp, C] -> [N*out_h*out_w, C*kh*kw], columns ordered (c, m, n)
    n_img, _, _, ch = x.shape
    cols = np.empty((n_img * out_h * out_w, ch * kh * kw))
    row = 0
    for b in range(n_img):
        for i in range(out_h):
            for j in range(out_w):
                r0 = i * stride
                c0 = j * stride
                k = 0
                for c in range(ch):
                    for m in range(kh):
                        for n in range(kw):
                            cols[row, k] = x[b, r0 + m, c0 + n, c]
                            k += 1
                row += 1
    return cols


@njit(**_OPTS)
def col2im(cols, shape, kh, kw, stride, out_h, out_w):
    # adjoint of im2col: scatter-add columns back into a padded [N, Hp, Wp, C] array
    n_img, hp, wp, ch = shape
    x = np.zeros((n_img, hp, wp, ch))
    row = 0
    for b in range(n_img):
        for i in range(out_h):
            for j in range(out_w):
                r0 = i * stride
                c0 = j * stride
                k = 0
                for c in range(ch):
                    for m in range(kh):
                        for n in range(kw):
                            x[b, r0 + m, c0 + n, c] += cols[row, k]
                            k += 1
                row += 1
    return x


@njit(**_OPTS)
def maxpool_forward(x, window, stride, out_h, out_w):
    """Max over each window; also returns the flat in-window index of the winner.

    Ties go to the first maximum in row-major window order.
    """
    n_img, _, _, ch = x.shape
    out = np.empty((n_img, out_h, out_w, ch))
    arg = np.empty((n_img, out_h, out_w, ch), dtype=np.int64)
    for b in range(n_img):
        for i in range(out_h):
            for j in range(out_w):
                for c in range(ch):
                    r0 = i * stride
                    c0 = j * stride
                    best = x[b, r0, c0, c]
                    best_k = 0
                    k = 0
                    for m in range(window):
                        for n in range(window):
                            v = x[b, r0 + m, c0 + n, c]
                            if v > best:
                                best = v
                                best_k = k
                            k += 1
                    out[b, i, j, c] = best
                    arg[b, i, j, c] = best_k
    return out, arg


@njit(**_OPTS)
def maxpool_backward(grad, arg, shape, window, stride):
    n_img, out_h, out_w, ch = grad.shape
    dx = np.zeros(shape)
    for b in range(n_img):
        for i in range(out_h):
            for j in range(out_w):
                for c in range(ch):
                    k = arg[b, i, j, c]
                    r = i * stride + k // window
                    s = j * stride + k % window
                    dx[b, r, s, c] += grad[b, i, j, c]
    return dx


@njit(**_OPTS)
def warp_bilinear(img, out_h, out_w, coeffs, clamp):
    """Inverse-map bilinear resampling of an [H, W, C] image.

    ``coeffs = (a, b, c, d, e, f)`` maps an output pixel (x=col, y=row) to the
    source point ``(a*x + b*y + c, d*x + e*y + f)``.  Outside samples read 0,
    or the nearest edge pixel when ``clamp`` is set.
    """
    h, w, ch = img.shape
    a, b_, c_, d, e, f = coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5]
    out = np.zeros((out_h, out_w, ch))
    for y in range(out_h):
        for x in range(out_w):
            sx = a * x + b_ * y + c_
            sy = d * x + e * y + f
            if clamp:
                sx = min(max(sx, 0.0), w - 1.0)
                sy = min(max(sy, 0.0), h - 1.0)
            elif sx <= -1.0 or sy <= -1.0 or sx >= w or sy >= h:
                continue
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            fx = sx - x0
            fy = sy - y0
            for dy in range(2):
                yy = y0 + dy
                if yy < 0 or yy >= h:
                    continue
                wy = fy if dy else 1.0 - fy
                if wy == 0.0:
                    continue
                for dx in range(2):
                    xx = x0 + dx
                    if xx < 0 or xx >= w:
                        continue
                    wx = fx if dx else 1.0 - fx
                    if wx == 0.0:
                        continue
                    wgt = wx * wy
                    for c in range(ch):
                        out[y, x, c] += wgt * img[yy, xx, c]
    return out


@njit(**_OPTS)
def _snap(v, c_reg):
    # rounding residue next to a bound would keep a dead index in the working set
    eps = 1e-12 * c_reg
    if v < eps:
        return 0.0
    if v > c_reg - eps:
        return c_reg
    return v


@njit(**_OPTS)
def smo_solve(gram, y, c_reg, tol, max_iter):
    """Dual SVM solve by SMO with maximal-violating-pair working sets.

    Returns (alpha, bias, iterations).  ``err[t]`` holds
    ``sum_l alpha_l y_l K[t, l] - y[t]`` (the error without bias).
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    err = -y.copy()
    it = 0
    while it < max_iter:
        # i: most violating index in I_up
        g_max = -np.inf
        i = -1
        for t in range(n):
            up = (y[t] > 0 and alpha[t] < c_reg) or (y[t] < 0 and alpha[t] > 0)
            if up and -err[t] > g_max:
                g_max = -err[t]
                i = t
        g_min = np.inf
        j = -1
        best = -np.inf
        for t in range(n):
            low = (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c_reg)
            if not low:
                continue
            if -err[t] < g_min:
                g_min = -err[t]
            if i >= 0:
                diff = g_max + err[t]
                if diff > 0:
                    quad = gram[i, i] + gram[t, t] - 2.0 * gram[i, t]
                    if quad <= 0:
                        quad = 1e-12
                    score = diff * diff / quad
                    if score > best:
                        best = score
                        j = t
        if i < 0 or j < 0 or g_max - g_min < tol:
            break
        eta = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        if eta <= 0:
            eta = 1e-12
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            lo = max(0.0, aj - ai)
            hi = min(c_reg, c_reg + aj - ai)
        else:
            lo = max(0.0, ai + aj - c_reg)
            hi = min(c_reg, ai + aj)
        aj_new = aj + y[j] * (err[i] - err[j]) / eta
        aj_new = _snap(min(max(aj_new, lo), hi), c_reg)
        ai_new = ai + y[i] * y[j] * (aj - aj_new)
        ai_new = _snap(min(max(ai_new, 0.0), c_reg), c_reg)
        d_i = (ai_new - ai) * y[i]
        d_j = (aj_new - aj) * y[j]
        alpha[i] = ai_new
        alpha[j] = aj_new
        for t in range(n):
            err[t] += d_i * gram[t, i] + d_j * gram[t, j]
        it += 1

    total = 0.0
    n_free = 0
    up_max = -np.inf
    low_min = np.inf
    for t in range(n):
        if 0.0 < alpha[t] < c_reg:
            total += -err[t]
            n_free += 1
        up = (y[t] > 0 and alpha[t] < c_reg) or (y[t] < 0 and alpha[t] > 0)
        low = (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c_reg)
        if up:
            up_max = max(up_max, -err[t])
        if low:
            low_min = min(low_min, -err[t])
    if n_free > 0:
        bias = total / n_free
    elif up_max == -np.inf:
        bias = low_min
    elif low_min == np.inf:
        bias = up_max
    else:
        bias = 0.5 * (up_max + low_min)
    return alpha, bias, it
