"""Uniform LBP(8,2) codes and the three block-histogram descriptors.

* :func:`extract_lbp` -- 90x90 face, 10x10 grid of 9x9 blocks (5900 values)
* :func:`extract_mslbp` -- the same face at sizes 90/72/54/36/18 (12980)
* :func:`extract_highdim_lbp` -- 40x40 patches around 27 landmarks of a
  300x300 frame at five scales, 4x4 blocks of 10x10 pixels (127440)

Histograms hold raw counts, so each segment sums to its block's pixel count.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ValidationError
from .imgcore import Image, bicubic_resize

N_BINS = 59
FACE_SIZE = 90
FACE_BLOCK = 9
MSLBP_SIZES = (90, 72, 54, 36, 18)
HIGHDIM_FRAME = 300
HIGHDIM_PATCH = 40
HIGHDIM_BLOCK = 10
HIGHDIM_SCALES = (1.0, 0.84, 0.7, 0.59, 0.5)
N_LANDMARKS = 27


@dataclass(frozen=True)
class LbpParams:
    points: int = 8
    radius: int = 2

    @property
    def uniform_bins(self):
        return self.points * (self.points - 1) + 3


DEFAULT_PARAMS = LbpParams()


def transitions(code, points=8):
    """Number of circular 0/1 changes in an LBP code."""
    rotated = ((code >> 1) | ((code & 1) << (points - 1)))
    return bin(code ^ rotated).count("1")


@lru_cache(maxsize=None)
def uniform_table(points=8):
    """Lookup array: code -> bin; uniform codes get 0.. in ascending order."""
    table = np.empty(1 << points, dtype=np.int64)
    nxt = 0
    other = points * (points - 1) + 2
    for code in range(1 << points):
        if transitions(code, points) <= 2:
            table[code] = nxt
            nxt += 1
        else:
            table[code] = other
    table.setflags(write=False)
    return table


def uniform_bin(code):
    if not 0 <= code <= 255:
        raise ValidationError(f"code {code} outside 0..255")
    return int(uniform_table(8)[code])


def neighbor_offsets(params=DEFAULT_PARAMS):
    """(dx, dy) of the sampling circle; k = 0 points along +x, counter-clockwise."""
    ang = 2.0 * np.pi * np.arange(params.points) / params.points
    dx = params.radius * np.cos(ang)
    dy = -params.radius * np.sin(ang)
    # snap grid-aligned samples so they skip interpolation
    for v in (dx, dy):
        near = np.abs(v - np.round(v)) < 1e-9
        v[near] = np.round(v[near])
    return dx + 0.0, dy + 0.0


def _gray_plane(img):
    if isinstance(img, Image):
        if img.channels != 1:
            raise ValidationError("LBP needs a single-channel image")
        return img.data[0]
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ValidationError(f"LBP needs a 2-D plane, got shape {arr.shape}")
    return arr


def lbp_code_image(gray, params=DEFAULT_PARAMS):
    """Per-pixel LBP codes (uint8, same size as input); bit k set iff neighbour k >= centre."""
    plane = _gray_plane(gray)
    r = params.radius
    if min(plane.shape) <= 2 * r:
        raise ValidationError(f"image {plane.shape} too small for radius {r}")
    padded = np.pad(plane, r, mode="edge")
    dx, dy = neighbor_offsets(params)
    return kernels.lbp_codes(padded, r, dx, dy)


class Segment(NamedTuple):
    scale: int
    block_row: int
    block_col: int
    offset: int
    length: int = N_BINS
    landmark: int = -1


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    layout: tuple = field(default_factory=tuple)
    kind: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "layout", tuple(self.layout))
        if self.layout and len(v) != sum(s.length for s in self.layout):
            raise ValidationError(f"{len(v)} values but layout covers {sum(s.length for s in self.layout)}")

    def __len__(self):
        return len(self.values)

    def segment(self, i):
        s = self.layout[i]
        return self.values[s.offset:s.offset + s.length]

    def segment_sums(self):
        return np.array([self.segment(i).sum() for i in range(len(self.layout))])

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.kind == other.kind and self.layout == other.layout and np.array_equal(
            self.values, other.values)


def _grid_histograms(codes, block_h, block_w):
    """(rows, cols, 59) histogram counts for a code plane."""
    h, w = codes.shape
    gr, gc = h // block_h, w // block_w
    bins = uniform_table(8)[codes]
    blocks = bins.reshape(gr, block_h, gc, block_w).transpose(0, 2, 1, 3).reshape(gr * gc, -1)
    offs = np.arange(gr * gc)[:, None] * N_BINS
    hist = np.bincount((blocks + offs).ravel(), minlength=gr * gc * N_BINS)
    return hist.reshape(gr, gc, N_BINS).astype(np.float64)


def block_histograms(codes, block_w, block_h, scale_index=0):
    """Row-major block histograms of a code plane as one FeatureVector."""
    codes = np.asarray(codes)
    h, w = codes.shape
    if block_w < 1 or block_h < 1 or h % block_h or w % block_w:
        raise ValidationError(f"plane {w}x{h} not divisible into {block_w}x{block_h} blocks")
    hist = _grid_histograms(codes, block_h, block_w)
    layout = _grid_layout(hist.shape[0], hist.shape[1], scale_index, 0)
    return FeatureVector(hist.reshape(-1), layout, "blocks")


def _grid_layout(rows, cols, scale, start, landmark=-1):
    return tuple(Segment(scale, r, c, start + (r * cols + c) * N_BINS, N_BINS, landmark)
                 for r in range(rows) for c in range(cols))


def _check_face(face):
    plane = _gray_plane(face)
    if plane.shape != (FACE_SIZE, FACE_SIZE):
        raise ValidationError(f"face must be {FACE_SIZE}x{FACE_SIZE}, got {plane.shape[1]}x{plane.shape[0]}")
    return plane


def extract_lbp(face, params=DEFAULT_PARAMS):
    """5900-value descriptor of a 90x90 gray face."""
    plane = _check_face(face)
    fv = block_histograms(lbp_code_image(plane, params), FACE_BLOCK, FACE_BLOCK)
    return FeatureVector(fv.values, fv.layout, "lbp")


@lru_cache(maxsize=None)
def mslbp_layout(sizes=MSLBP_SIZES, block=FACE_BLOCK):
    segs = []
    for si, size in enumerate(sizes):
        g = size // block
        segs.extend(_grid_layout(g, g, si, len(segs) * N_BINS))
    return tuple(segs)


def extract_mslbp(face, params=DEFAULT_PARAMS, sizes=MSLBP_SIZES):
    """12980-value multi-scale descriptor of a 90x90 gray face."""
    plane = _check_face(face)
    parts = []
    for size in sizes:
        if size % FACE_BLOCK:
            raise ValidationError(f"scale {size} not divisible by {FACE_BLOCK}")
        scaled = plane if size == FACE_SIZE else bicubic_resize(Image(plane[None]), size, size).data[0]
        parts.append(_grid_histograms(lbp_code_image(scaled, params), FACE_BLOCK, FACE_BLOCK).reshape(-1))
    return FeatureVector(np.concatenate(parts), mslbp_layout(tuple(sizes)), "mslbp")


@dataclass(frozen=True, eq=False)
class Landmarks:
    """27 (x, y) points in the 300x300 reference frame."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValidationError(f"need {N_LANDMARKS} landmarks, got array of shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("non-finite landmark coordinate")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        return isinstance(other, Landmarks) and np.array_equal(self.points, other.points)


def scaled_size(factor, frame=HIGHDIM_FRAME):
    return max(HIGHDIM_PATCH, int(round(frame * factor)))


def patch_origin(cx, cy, size, patch=HIGHDIM_PATCH):
    """Top-left of a patch centred on (cx, cy), clamped inside a size x size image."""
    x0 = int(np.floor(cx + 0.5)) - patch // 2
    y0 = int(np.floor(cy + 0.5)) - patch // 2
    return min(max(x0, 0), size - patch), min(max(y0, 0), size - patch)


@lru_cache(maxsize=None)
def highdim_layout(n_scales=len(HIGHDIM_SCALES), n_landmarks=N_LANDMARKS):
    g = HIGHDIM_PATCH // HIGHDIM_BLOCK
    segs = []
    for s in range(n_scales):
        for lm in range(n_landmarks):
            segs.extend(_grid_layout(g, g, s, len(segs) * N_BINS, lm))
    return tuple(segs)


def extract_highdim_lbp(img, lm, params=DEFAULT_PARAMS, scales=HIGHDIM_SCALES):
    """127440-value landmark descriptor of a 300x300 gray frame.

    Codes are computed on each rescaled frame, then 40x40 windows around the
    rescaled landmarks are cut into 4x4 blocks of 10x10 pixels.
    """
    plane = _gray_plane(img)
    if plane.shape != (HIGHDIM_FRAME, HIGHDIM_FRAME):
        raise ValidationError(f"frame must be {HIGHDIM_FRAME}x{HIGHDIM_FRAME}, got {plane.shape[1]}x{plane.shape[0]}")
    if not isinstance(lm, Landmarks):
        lm = Landmarks(lm)
    parts = []
    for factor in scales:
        size = scaled_size(factor)
        scaled = plane if size == HIGHDIM_FRAME else bicubic_resize(Image(plane[None]), size, size).data[0]
        codes = lbp_code_image(scaled, params)
        ratio = size / HIGHDIM_FRAME
        for x, y in lm.points:
            # half-pixel-centre mapping, same as the resampler
            x0, y0 = patch_origin((x + 0.5) * ratio - 0.5, (y + 0.5) * ratio - 0.5, size)
            window = codes[y0:y0 + HIGHDIM_PATCH, x0:x0 + HIGHDIM_PATCH]
            parts.append(_grid_histograms(window, HIGHDIM_BLOCK, HIGHDIM_BLOCK).reshape(-1))
    return FeatureVector(np.concatenate(parts), highdim_layout(len(scales), N_LANDMARKS), "highdim")


# -- PCA -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray  # (d,)
    basis: np.ndarray  # (d, k), orthonormal columns

    @property
    def input_dim(self):
        return self.basis.shape[0]

    @property
    def output_dim(self):
        return self.basis.shape[1]


def _matrix(vectors):
    rows = [v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64).reshape(-1)
            for v in vectors]
    if len({len(r) for r in rows}) > 1:
        raise ValidationError("vectors have inconsistent lengths")
    return np.vstack(rows)


def pca_fit(vectors, out_dim=400):
    """Top ``out_dim`` principal directions of mean-centred data.

    Each basis vector is signed so its largest-magnitude entry is positive.
    """
    vectors = list(vectors)
    if len(vectors) < out_dim + 1:
        raise ValidationError(f"PCA to {out_dim} dims needs >= {out_dim + 1} vectors, got {len(vectors)}")
    x = _matrix(vectors)
    if out_dim > x.shape[1]:
        raise ValidationError(f"out_dim {out_dim} exceeds input dimension {x.shape[1]}")
    mean = x.mean(axis=0)
    _, _, vt = np.linalg.svd(x - mean, full_matrices=False)
    basis = vt[:out_dim].T.copy()
    pivot = np.argmax(np.abs(basis), axis=0)
    basis *= np.sign(basis[pivot, np.arange(out_dim)])
    return PcaModel(mean, basis)


def pca_project(model, v):
    values = v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64).reshape(-1)
    if len(values) != model.input_dim:
        raise ValidationError(f"vector length {len(values)} != PCA input dim {model.input_dim}")
    return FeatureVector(model.basis.T @ (values - model.mean), (), "pca")
