"""Vectorised numpy versions of the loop kernels in ``_numba``."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x, kh, kw, stride, out_h, out_w):
    # [N, out_h, out_w, C, kh, kw] view
    v = sliding_window_view(x, (kh, kw), axis=(1, 2))
    return v[:, : (out_h - 1) * stride + 1 : stride, : (out_w - 1) * stride + 1 : stride]


def im2col(x, kh, kw, stride, out_h, out_w):
    n_img, ch = x.shape[0], x.shape[3]
    v = _windows(x, kh, kw, stride, out_h, out_w)
    return np.ascontiguousarray(v).reshape(n_img * out_h * out_w, ch * kh * kw)


def col2im(cols, shape, kh, kw, stride, out_h, out_w):
    n_img, hp, wp, ch = shape
    x = np.zeros((n_img, hp, wp, ch))
    blocks = cols.reshape(n_img, out_h, out_w, ch, kh, kw)
    r_end = (out_h - 1) * stride + 1
    c_end = (out_w - 1) * stride + 1
    for m in range(kh):
        for n in range(kw):
            x[:, m : m + r_end : stride, n : n + c_end : stride, :] += blocks[..., m, n]
    return x


def maxpool_forward(x, window, stride, out_h, out_w):
    v = _windows(x, window, window, stride, out_h, out_w)
    flat = v.reshape(v.shape[:4] + (window * window,))
    arg = np.argmax(flat, axis=-1)  # first occurrence on ties
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, arg.astype(np.int64)


def maxpool_backward(grad, arg, shape, window, stride):
    n_img, out_h, out_w, ch = grad.shape
    dx = np.zeros(shape)
    b, i, j, c = np.indices(grad.shape)
    rows = i * stride + arg // window
    cols = j * stride + arg % window
    np.add.at(dx, (b, rows, cols, c), grad)
    return dx


def warp_bilinear(img, out_h, out_w, coeffs, clamp):
    h, w, ch = img.shape
    a, b, c, d, e, f = coeffs
    ys, xs = np.meshgrid(np.arange(out_h, dtype=float), np.arange(out_w, dtype=float), indexing="ij")
    sx = a * xs + b * ys + c
    sy = d * xs + e * ys + f
    if clamp:
        sx = np.clip(sx, 0.0, w - 1.0)
        sy = np.clip(sy, 0.0, h - 1.0)
        inside = np.ones(sx.shape, dtype=bool)
    else:
        inside = (sx > -1.0) & (sy > -1.0) & (sx < w) & (sy < h)
    x0 = np.floor(np.where(inside, sx, 0.0)).astype(np.int64)
    y0 = np.floor(np.where(inside, sy, 0.0)).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros((out_h, out_w, ch))
    for dy in (0, 1):
        wy = fy if dy else 1.0 - fy
        yy = y0 + dy
        for dx in (0, 1):
            wx = fx if dx else 1.0 - fx
            xx = x0 + dx
            ok = inside & (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w) & (wx * wy != 0.0)
            vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
            out += np.where(ok[..., None], (wx * wy)[..., None] * vals, 0.0)
    return out


def _snap(v, c_reg):
    eps = 1e-12 * c_reg
    if v < eps:
        return 0.0
    if v > c_reg - eps:
        return c_reg
    return v


def smo_solve(gram, y, c_reg, tol, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    err = -y.astype(float)
    pos = y > 0
    diag = np.diag(gram)
    it = 0
    while it < max_iter:
        up = np.where(pos, alpha < c_reg, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c_reg)
        if not up.any() or not low.any():
            break
        neg_err = -err
        i = int(np.argmax(np.where(up, neg_err, -np.inf)))
        g_max = neg_err[i]
        g_min = np.min(neg_err[low])
        if g_max - g_min < tol:
            break
        diff = g_max + err
        quad = diag[i] + diag - 2.0 * gram[i]
        quad = np.where(quad <= 0, 1e-12, quad)
        score = np.where(low & (diff > 0), diff * diff / quad, -np.inf)
        j = int(np.argmax(score))
        if score[j] == -np.inf:
            break
        eta = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        if eta <= 0:
            eta = 1e-12
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            lo, hi = max(0.0, aj - ai), min(c_reg, c_reg + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - c_reg), min(c_reg, ai + aj)
        aj_new = _snap(min(max(aj + y[j] * (err[i] - err[j]) / eta, lo), hi), c_reg)
        ai_new = _snap(min(max(ai + y[i] * y[j] * (aj - aj_new), 0.0), c_reg), c_reg)
        d_i = (ai_new - ai) * y[i]
        d_j = (aj_new - aj) * y[j]
        alpha[i] = ai_new
        alpha[j] = aj_new
        err += d_i * gram[:, i] + d_j * gram[:, j]
        it += 1

    up = np.where(pos, alpha < c_reg, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < c_reg)
    free = (alpha > 0) & (alpha < c_reg)
    if free.any():
        bias = float(np.sum(-err[free]) / free.sum())
    elif not up.any():
        bias = float(np.min(-err[low]))
    elif not low.any():
        bias = float(np.max(-err[up]))
    else:
        bias = 0.5 * (float(np.max(-err[up])) + float(np.min(-err[low])))
    return alpha, bias, it
