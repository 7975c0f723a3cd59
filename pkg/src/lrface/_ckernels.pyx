# cython: language_level=3
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def lbp_codes(const double[:, ::1] padded, int radius, const double[::1] dxs, const double[::1] dys):
    cdef Py_ssize_t h = padded.shape[0] - 2 * radius
    cdef Py_ssize_t w = padded.shape[1] - 2 * radius
    cdef Py_ssize_t npts = dxs.shape[0]
    if npts > 8:
        raise ValueError("at most 8 sampling points fit a uint8 code")
    codes_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] codes = codes_arr
    cdef Py_ssize_t y, x, k, r0, c0
    cdef int x0s[8]
    cdef int y0s[8]
    cdef int mode[8]
    cdef double fxs[8]
    cdef double fys[8]
    cdef double fxys[8]
    cdef double fx, fy, c00, c10, c01, c11, sample, center
    cdef unsigned char code
    for k in range(npts):
        x0s[k] = <int>floor(dxs[k])
        y0s[k] = <int>floor(dys[k])
        fxs[k] = dxs[k] - x0s[k]
        fys[k] = dys[k] - y0s[k]
        fxys[k] = fxs[k] * fys[k]
        mode[k] = (fxs[k] != 0.0) + 2 * (fys[k] != 0.0)
    for y in range(h):
        for x in range(w):
            center = padded[radius + y, radius + x]
            code = 0
            for k in range(npts):
                r0 = radius + y0s[k] + y
                c0 = radius + x0s[k] + x
                c00 = padded[r0, c0]
                fx = fxs[k]
                fy = fys[k]
                if mode[k] == 0:
                    sample = c00
                elif mode[k] == 1:
                    sample = c00 + fx * (padded[r0, c0 + 1] - c00)
                elif mode[k] == 2:
                    sample = c00 + fy * (padded[r0 + 1, c0] - c00)
                else:
                    c10 = padded[r0, c0 + 1]
                    c01 = padded[r0 + 1, c0]
                    c11 = padded[r0 + 1, c0 + 1]
                    sample = ((c00 + fx * (c10 - c00)) + fy * (c01 - c00)) + fxys[k] * (((c11 - c10) - c01) + c00)
                if sample >= center:
                    code |= <unsigned char>(1 << k)
            codes[y, x] = code
    return codes_arr


def conv2d_same(const double[:, :, ::1] padded, const double[:, :, :, ::1] weights, const double[::1] bias):
    cdef Py_ssize_t cout = weights.shape[0]
    cdef Py_ssize_t cin = weights.shape[1]
    cdef Py_ssize_t kh = weights.shape[2]
    cdef Py_ssize_t kw = weights.shape[3]
    cdef Py_ssize_t h = padded.shape[1] - kh + 1
    cdef Py_ssize_t w = padded.shape[2] - kw + 1
    out_arr = np.empty((cout, h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t o, i, y, x, dy, dx
    cdef double wv
    for o in range(cout):
        for y in range(h):
            for x in range(w):
                out[o, y, x] = bias[o]
        for i in range(cin):
            for dy in range(kh):
                for dx in range(kw):
                    wv = weights[o, i, dy, dx]
                    for y in range(h):
                        for x in range(w):
                            out[o, y, x] += wv * padded[i, y + dy, x + dx]
    return out_arr


def chi2_matrix(const double[:, ::1] probes, const double[:, ::1] gallery):
    cdef Py_ssize_t n = probes.shape[0]
    cdef Py_ssize_t m = gallery.shape[0]
    cdef Py_ssize_t d = probes.shape[1]
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, a, b, s, diff
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                a = probes[i, k]
                b = gallery[j, k]
                s = a + b
                if s != 0.0:
                    diff = a - b
                    acc += diff * diff / s
            out[i, j] = acc
    return out_arr
