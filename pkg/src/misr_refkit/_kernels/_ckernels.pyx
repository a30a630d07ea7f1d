# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, exp

cnp.import_array()


cdef inline Py_ssize_t _clip(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


cdef void _shift_rows(const double[:, ::1] src, double[:, ::1] dst,
                      double shift, int order) noexcept nogil:
    # resample along axis 1
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t y, x, i0, c
    cdef double f, f2, f3, w0, w2, w3, a
    i0 = <Py_ssize_t>floor(shift)
    f = shift - i0
    if order == 0:
        for y in range(h):
            for x in range(w):
                dst[y, x] = src[y, _clip(<Py_ssize_t>floor(x + shift + 0.5), w)]
        return
    if f == 0.0:
        for y in range(h):
            for x in range(w):
                dst[y, x] = src[y, _clip(x + i0, w)]
        return
    if order == 1:
        for y in range(h):
            for x in range(w):
                a = src[y, _clip(x + i0, w)]
                dst[y, x] = a + f * (src[y, _clip(x + i0 + 1, w)] - a)
        return
    f2 = f * f
    f3 = f2 * f
    w0 = 0.5 * (-f3 + 2.0 * f2 - f)
    w2 = 0.5 * (-3.0 * f3 + 4.0 * f2 + f)
    w3 = 0.5 * (f3 - f2)
    for y in range(h):
        for x in range(w):
            c = x + i0
            a = src[y, _clip(c, w)]
            dst[y, x] = (a + w0 * (src[y, _clip(c - 1, w)] - a)
                         + w2 * (src[y, _clip(c + 1, w)] - a)
                         + w3 * (src[y, _clip(c + 2, w)] - a))


cdef void _shift_cols(const double[:, ::1] src, double[:, ::1] dst,
                      double shift, int order) noexcept nogil:
    # resample along axis 0
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t y, x, i0, r0, rm, r1, r2
    cdef double f, f2, f3, w0, w2, w3, a
    i0 = <Py_ssize_t>floor(shift)
    f = shift - i0
    if order == 0:
        for y in range(h):
            r0 = _clip(<Py_ssize_t>floor(y + shift + 0.5), h)
            for x in range(w):
                dst[y, x] = src[r0, x]
        return
    if f == 0.0:
        for y in range(h):
            r0 = _clip(y + i0, h)
            for x in range(w):
                dst[y, x] = src[r0, x]
        return
    if order == 1:
        for y in range(h):
            r0 = _clip(y + i0, h)
            r1 = _clip(y + i0 + 1, h)
            for x in range(w):
                a = src[r0, x]
                dst[y, x] = a + f * (src[r1, x] - a)
        return
    f2 = f * f
    f3 = f2 * f
    w0 = 0.5 * (-f3 + 2.0 * f2 - f)
    w2 = 0.5 * (-3.0 * f3 + 4.0 * f2 + f)
    w3 = 0.5 * (f3 - f2)
    for y in range(h):
        r0 = _clip(y + i0, h)
        rm = _clip(y + i0 - 1, h)
        r1 = _clip(y + i0 + 1, h)
        r2 = _clip(y + i0 + 2, h)
        for x in range(w):
            a = src[r0, x]
            dst[y, x] = (a + w0 * (src[rm, x] - a)
                         + w2 * (src[r1, x] - a)
                         + w3 * (src[r2, x] - a))


def translate(img, double dx, double dy, int order):
    cdef double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    tmp_arr = np.empty((h, w), dtype=np.float64)
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    with nogil:
        _shift_rows(src, tmp, dx, order)
        _shift_cols(tmp, out, dy, order)
    sx = np.arange(w) + dx
    sy = np.arange(h) + dy
    vx = (sx >= 0.0) & (sx <= w - 1)
    vy = (sy >= 0.0) & (sy <= h - 1)
    return out_arr, vy[:, None] & vx[None, :]


def ic_sums(gx, gy, err, valid):
    cdef const double[:, ::1] a = np.ascontiguousarray(gx, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(gy, dtype=np.float64)
    cdef const double[:, ::1] e = np.ascontiguousarray(err, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1], y, x
    cdef double saa = 0, sab = 0, sbb = 0, sa = 0, sb = 0
    cdef double sae = 0, sbe = 0, se = 0, see = 0, va, vb, ve
    cdef Py_ssize_t n = 0
    with nogil:
        for y in range(h):
            for x in range(w):
                if m[y, x]:
                    va = a[y, x]
                    vb = b[y, x]
                    ve = e[y, x]
                    saa += va * va
                    sab += va * vb
                    sbb += vb * vb
                    sa += va
                    sb += vb
                    sae += va * ve
                    sbe += vb * ve
                    se += ve
                    see += ve * ve
                    n += 1
    jtj = np.array([[saa, sab, sa], [sab, sbb, sb], [sa, sb, <double>n]])
    jte = np.array([sae, sbe, se])
    return jtj, jte, see, n


def splat(px, py, values, weights, Py_ssize_t height, Py_ssize_t width,
          double sigma, double radius):
    cdef const double[::1] xs = np.ascontiguousarray(px, dtype=np.float64)
    cdef const double[::1] ys = np.ascontiguousarray(py, dtype=np.float64)
    cdef const double[::1] vs = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] ws = np.ascontiguousarray(weights, dtype=np.float64)
    acc_w_arr = np.zeros((height, width), dtype=np.float64)
    acc_v_arr = np.zeros((height, width), dtype=np.float64)
    cdef double[:, ::1] acc_w = acc_w_arr
    cdef double[:, ::1] acc_v = acc_v_arr
    cdef Py_ssize_t n = xs.shape[0], s, bx, by, cx, cy, ox, oy
    cdef Py_ssize_t k = <Py_ssize_t>ceil(radius)
    cdef double r2 = radius * radius, inv = 1.0 / (2.0 * sigma * sigma)
    cdef double d2, dy2, g, sx, sy
    with nogil:
        for s in range(n):
            sx = xs[s]
            sy = ys[s]
            bx = <Py_ssize_t>floor(sx)
            by = <Py_ssize_t>floor(sy)
            for oy in range(-k, k + 1):
                cy = by + oy
                if cy < 0 or cy >= height:
                    continue
                dy2 = (cy - sy) * (cy - sy)
                for ox in range(-k, k + 1):
                    cx = bx + ox
                    if cx < 0 or cx >= width:
                        continue
                    d2 = dy2 + (cx - sx) * (cx - sx)
                    if d2 > r2:
                        continue
                    g = exp(-d2 * inv) * ws[s]
                    acc_w[cy, cx] += g
                    acc_v[cy, cx] += g * vs[s]
    return acc_w_arr, acc_v_arr


def cpsnr_scan(hr_crop, clear, sr, int window):
    cdef const double[:, ::1] hc = np.ascontiguousarray(hr_crop, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(clear, dtype=np.uint8)
    cdef const double[:, ::1] s = np.ascontiguousarray(sr, dtype=np.float64)
    cdef Py_ssize_t ch = hc.shape[0], cw = hc.shape[1], u, v, y, x, n = 0
    cmse_arr = np.full((window, window), np.nan)
    bias_arr = np.full((window, window), np.nan)
    count_arr = np.zeros((window, window), dtype=np.int64)
    cdef double[:, ::1] cmse = cmse_arr
    cdef double[:, ::1] bias = bias_arr
    cdef cnp.int64_t[:, ::1] count = count_arr
    cdef double acc, b, r
    for y in range(ch):
        for x in range(cw):
            if m[y, x]:
                n += 1
    if n == 0:
        return cmse_arr, bias_arr, count_arr
    with nogil:
        for u in range(window):
            for v in range(window):
                acc = 0.0
                for y in range(ch):
                    for x in range(cw):
                        if m[y, x]:
                            acc += hc[y, x] - s[u + y, v + x]
                b = acc / n
                acc = 0.0
                for y in range(ch):
                    for x in range(cw):
                        if m[y, x]:
                            r = hc[y, x] - s[u + y, v + x] - b
                            acc += r * r
                cmse[u, v] = acc / n
                bias[u, v] = b
                count[u, v] = n
    return cmse_arr, bias_arr, count_arr
