"""Pure numpy implementations of the hot kernels.

These define the reference semantics; ``_ckernels.pyx`` mirrors them loop for
loop. Inputs are validated by the callers in :mod:`lrface.kernels`.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def lbp_codes(padded, radius, dxs, dys):
    """LBP codes of the interior of a plane already edge-padded by ``radius``."""
    h = padded.shape[0] - 2 * radius
    w = padded.shape[1] - 2 * radius
    center = padded[radius:radius + h, radius:radius + w]
    codes = np.zeros((h, w), dtype=np.uint8)
    for k in range(len(dxs)):
        x0 = int(np.floor(dxs[k]))
        y0 = int(np.floor(dys[k]))
        fx = dxs[k] - x0
        fy = dys[k] - y0
        r0, c0 = radius + y0, radius + x0
        c00 = padded[r0:r0 + h, c0:c0 + w]
        if fx == 0.0 and fy == 0.0:
            sample = c00
        elif fy == 0.0:
            c10 = padded[r0:r0 + h, c0 + 1:c0 + 1 + w]
            sample = c00 + fx * (c10 - c00)
        elif fx == 0.0:
            c01 = padded[r0 + 1:r0 + 1 + h, c0:c0 + w]
            sample = c00 + fy * (c01 - c00)
        else:
            c10 = padded[r0:r0 + h, c0 + 1:c0 + 1 + w]
            c01 = padded[r0 + 1:r0 + 1 + h, c0:c0 + w]
            c11 = padded[r0 + 1:r0 + 1 + h, c0 + 1:c0 + 1 + w]
            fxy = fx * fy
            sample = ((c00 + fx * (c10 - c00)) + fy * (c01 - c00)) + fxy * (((c11 - c10) - c01) + c00)
        codes |= (sample >= center).astype(np.uint8) << np.uint8(k)
    return codes


def conv2d_same(padded, weights, bias):
    """Cross-correlate a padded (in, H+kh-1, W+kw-1) stack; returns (out, H, W)."""
    kh, kw = weights.shape[2], weights.shape[3]
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
    out = np.einsum("ihwab,oiab->ohw", windows, weights, optimize=True)
    out += bias[:, None, None]
    return out


def chi2_matrix(probes, gallery):
    """Chi-square distances between rows; bins with zero total are skipped."""
    out = np.empty((probes.shape[0], gallery.shape[0]), dtype=np.float64)
    for i, p in enumerate(probes):
        num = (p - gallery) ** 2
        den = p + gallery
        ratio = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
        out[i] = ratio.sum(axis=1)
    return out
