"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same arithmetic (up to floating-point summation order).
"""
import math

import numpy as np


def cubic_weights(f):
    """Catmull-Rom (Keys, a=-0.5) tap weights for taps at -1, 0, +1, +2."""
    f2 = f * f
    f3 = f2 * f
    return (
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    )


def _shift_axis(img, shift, order, axis):
    n = img.shape[axis]
    x = np.arange(n)
    if order == 0:
        idx = np.clip(np.floor(x + shift + 0.5).astype(np.intp), 0, n - 1)
        return np.take(img, idx, axis=axis)
    i0 = math.floor(shift)
    f = shift - i0
    anchor = np.take(img, np.clip(x + i0, 0, n - 1), axis=axis)
    if f == 0.0:
        return anchor
    if order == 1:
        nxt = np.take(img, np.clip(x + i0 + 1, 0, n - 1), axis=axis)
        return anchor + f * (nxt - anchor)
    w0, _, w2, w3 = cubic_weights(f)
    # anchored form: exact on constants and at integer shifts
    out = anchor + w0 * (np.take(img, np.clip(x + i0 - 1, 0, n - 1), axis=axis) - anchor)
    out += w2 * (np.take(img, np.clip(x + i0 + 1, 0, n - 1), axis=axis) - anchor)
    out += w3 * (np.take(img, np.clip(x + i0 + 2, 0, n - 1), axis=axis) - anchor)
    return out


def translate(img, dx, dy, order):
    """Sample ``img`` at ``(x + dx, y + dy)``.

    Returns ``(out, valid)`` where ``valid`` flags samples whose source
    coordinate falls inside the image.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w = img.shape
    out = _shift_axis(img, dx, order, 1)
    out = _shift_axis(out, dy, order, 0)
    sx = np.arange(w) + dx
    sy = np.arange(h) + dy
    vx = (sx >= 0.0) & (sx <= w - 1)
    vy = (sy >= 0.0) & (sy <= h - 1)
    valid = vy[:, None] & vx[None, :]
    return np.ascontiguousarray(out), valid


def ic_sums(gx, gy, err, valid):
    """Normal-equation sums for the Jacobian ``[gx, gy, 1]``.

    Returns ``(jtj, jte, sse, n)``.
    """
    m = valid
    a = gx[m]
    b = gy[m]
    e = err[m]
    n = a.size
    jtj = np.array(
        [
            [np.dot(a, a), np.dot(a, b), a.sum()],
            [np.dot(a, b), np.dot(b, b), b.sum()],
            [a.sum(), b.sum(), float(n)],
        ]
    )
    jte = np.array([np.dot(a, e), np.dot(b, e), e.sum()])
    return jtj, jte, float(np.dot(e, e)), n


def splat(px, py, values, weights, height, width, sigma, radius):
    """Scatter weighted samples onto a grid with a truncated Gaussian.

    Returns ``(acc_w, acc_v)``; ``acc_v`` holds the weighted sum of values.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    acc_w = np.zeros(height * width)
    acc_v = np.zeros(height * width)
    k = int(math.ceil(radius))
    bx = np.floor(px).astype(np.intp)
    by = np.floor(py).astype(np.intp)
    r2 = radius * radius
    inv = 1.0 / (2.0 * sigma * sigma)
    for oy in range(-k, k + 1):
        cy = by + oy
        dy2 = (cy - py) ** 2
        for ox in range(-k, k + 1):
            cx = bx + ox
            d2 = dy2 + (cx - px) ** 2
            ok = (d2 <= r2) & (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
            if not ok.any():
                continue
            g = np.exp(-d2[ok] * inv) * weights[ok]
            flat = cy[ok] * width + cx[ok]
            acc_w += np.bincount(flat, weights=g, minlength=height * width)
            acc_v += np.bincount(flat, weights=g * values[ok], minlength=height * width)
    return acc_w.reshape(height, width), acc_v.reshape(height, width)


def cpsnr_scan(hr_crop, clear, sr, window):
    """Bias-corrected MSE of ``hr_crop`` against every ``window x window`` offset crop of ``sr``.

    Returns ``(cmse, bias, count)`` arrays of shape ``(window, window)``;
    windows without clear pixels carry ``count == 0`` and NaN statistics.
    """
    hr_crop = np.asarray(hr_crop, dtype=np.float64)
    sr = np.asarray(sr, dtype=np.float64)
    ch, cw = hr_crop.shape
    cmse = np.full((window, window), np.nan)
    bias = np.full((window, window), np.nan)
    count = np.zeros((window, window), dtype=np.int64)
    ref = hr_crop[clear]
    n = ref.size
    if n == 0:
        return cmse, bias, count
    for u in range(window):
        for v in range(window):
            d = ref - sr[u:u + ch, v:v + cw][clear]
            b = d.sum() / n
            r = d - b
            cmse[u, v] = np.dot(r, r) / n
            bias[u, v] = b
            count[u, v] = n
    return cmse, bias, count
