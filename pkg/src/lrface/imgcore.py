"""Image container, file I/O, luma conversion, bicubic resampling and PSNR.

Images are planar float64 arrays of shape (channels, height, width) with
samples in [0, 1]. Resampling uses the Catmull-Rom cubic (a = -0.5) with
half-pixel-centre coordinate mapping and replicated edges; shrinking
widens the kernel by the scale factor unless ``antialias=False``.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import ValidationError

GRAY = "Gray"
RGB = "RGB"

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
CUBIC_A = -0.5
#: returned by :func:`psnr` for identical images
PSNR_INF = float("inf")


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable planar raster.

    Parameters
    ----------
    data : (C, H, W) ndarray
        Samples, C in {1, 3}.
    colorspace : str, optional
        ``"Gray"`` or ``"RGB"``; inferred from C when omitted.
    """

    data: np.ndarray
    colorspace: str = ""

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise ValidationError(f"image data must be (1|3, H, W), got {arr.shape}")
        if arr.shape[1] == 0 or arr.shape[2] == 0:
            raise ValidationError("zero-dimension image")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("image contains non-finite samples")
        arr = np.array(arr, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        cs = self.colorspace or (GRAY if arr.shape[0] == 1 else RGB)
        if (cs == GRAY) != (arr.shape[0] == 1) or cs not in (GRAY, RGB):
            raise ValidationError(f"colorspace {cs!r} inconsistent with {arr.shape[0]} channels")
        object.__setattr__(self, "colorspace", cs)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def size(self):
        """(width, height)"""
        return self.width, self.height

    def plane(self, c=0):
        return self.data[c]

    def clamped(self):
        return Image(np.clip(self.data, 0.0, 1.0), self.colorspace)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.colorspace == other.colorspace and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Image({self.width}x{self.height}, {self.colorspace})"


def load_image(path):
    """Decode a PNG or JPEG into an :class:`Image` with samples in [0, 1]."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise ValidationError(f"{path}: unsupported format {im.format}")
            im.load()
            if im.mode in ("L", "1", "P") and _is_gray_palette(im):
                arr = np.asarray(im.convert("L"), dtype=np.float64)[None] / 255.0
            elif im.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64)[None]
                arr = arr / (65535.0 if im.mode.startswith("I;16") else max(arr.max(), 1.0))
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64).transpose(2, 0, 1) / 255.0
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ValidationError(f"{path}: cannot decode ({exc})") from None
    return Image(arr)


def _is_gray_palette(im):
    if im.mode != "P":
        return True
    pal = np.asarray(im.getpalette() or [], dtype=np.int64).reshape(-1, 3)
    return bool(np.all(pal[:, 0] == pal[:, 1]) and np.all(pal[:, 1] == pal[:, 2]))


def save_image(img, path):
    """Encode as PNG/JPEG (by suffix); samples are clamped and rounded to 8 bits."""
    path = Path(path)
    q = np.rint(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if img.channels == 1:
        pil = PILImage.fromarray(q[0], mode="L")
    else:
        pil = PILImage.fromarray(q.transpose(1, 2, 0), mode="RGB")
    fmt = "JPEG" if path.suffix.lower() in (".jpg", ".jpeg") else "PNG"
    path.parent.mkdir(parents=True, exist_ok=True)
    pil.save(path, format=fmt, quality=95) if fmt == "JPEG" else pil.save(path, format=fmt)


def to_gray(img):
    """BT.601 luma; gray input is returned unchanged."""
    if img.channels == 1:
        return img
    r, g, b = img.data
    wr, wg, wb = LUMA_WEIGHTS
    return Image((wr * r + wg * g + wb * b)[None], GRAY)


def cubic_weight(t, a=CUBIC_A):
    """Keys cubic convolution kernel evaluated at offsets ``t``."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2, t3 = t * t, t * t * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def resample_taps(n_in, n_out, antialias=True):
    """Tap indices and weights of a 1-D bicubic resize, each (n_out, taps).

    Output ``i`` is centred on source position ``s = (i + 0.5) * n_in / n_out - 0.5``.
    Enlarging uses the four taps ``floor(s) - 1 .. floor(s) + 2``. Shrinking
    with ``antialias`` stretches the kernel by the scale factor (the usual
    imresize behaviour) and renormalises the weights; without it the plain
    four-tap kernel is used. Out-of-range taps are clamped to the edge.
    """
    scale = n_in / n_out
    stretch = scale if (antialias and scale > 1.0) else 1.0
    support = 2.0 * stretch
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    ntaps = int(np.ceil(2.0 * support)) + 1
    first = np.floor(src - support).astype(np.int64) + 1
    idx = first[:, None] + np.arange(ntaps)[None, :]
    weights = cubic_weight((src[:, None] - idx) / stretch)
    if stretch != 1.0:
        weights /= weights.sum(axis=1, keepdims=True)
    anchor = np.clip(np.floor(src + 0.5).astype(np.int64), 0, n_in - 1)
    return np.clip(idx, 0, n_in - 1), weights, anchor


def _resample_axis(arr, n_out, axis, antialias=True):
    idx, wts, anchor_idx = resample_taps(arr.shape[axis], n_out, antialias)
    moved = np.moveaxis(arr, axis, -1)
    # anchor-relative sums keep constant signals bit-exact
    anchor = moved[..., anchor_idx]
    out = anchor.copy()
    for t in range(idx.shape[1]):
        out += wts[:, t] * (moved[..., idx[:, t]] - anchor)
    return np.moveaxis(out, -1, axis)


def resize_planes(planes, new_width, new_height, antialias=True):
    """Bicubic resize of a (C, H, W) array without clamping (linear map)."""
    if new_width < 1 or new_height < 1:
        raise ValidationError(f"target size must be >= 1, got {new_width}x{new_height}")
    planes = np.asarray(planes, dtype=np.float64)
    out = _resample_axis(planes, int(new_height), 1, antialias)
    return _resample_axis(out, int(new_width), 2, antialias)


def bicubic_resize(img, new_width, new_height, antialias=True):
    """Bicubic resize of every channel, clamped to [0, 1].

    See :func:`resample_taps` for the kernel; ``antialias`` only affects shrinking.
    """
    out = resize_planes(img.data, new_width, new_height, antialias)
    return Image(np.clip(out, 0.0, 1.0), img.colorspace)


def scale_down(img, factor, antialias=True):
    """Shrink by an integer factor; target size is ``floor(dim / factor)``."""
    w, h = img.width // factor, img.height // factor
    if w < 1 or h < 1:
        raise ValidationError(f"{img!r} too small to scale down by {factor}")
    return bicubic_resize(img, w, h, antialias)


def scale_up(img, factor):
    return bicubic_resize(img, img.width * factor, img.height * factor)


def bicubic_sample(plane, xs, ys):
    """Sample a 2-D plane at fractional pixel coordinates with edge clamping."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    bx = np.floor(xs).astype(np.int64)
    by = np.floor(ys).astype(np.int64)
    anchor = plane[np.clip(by, 0, h - 1), np.clip(bx, 0, w - 1)]
    out = anchor.copy()
    for ty in range(-1, 3):
        iy = by + ty
        wy = cubic_weight(ys - iy)
        iy = np.clip(iy, 0, h - 1)
        for tx in range(-1, 3):
            ix = bx + tx
            wx = cubic_weight(xs - ix)
            out += (wy * wx) * (plane[iy, np.clip(ix, 0, w - 1)] - anchor)
    return out


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for peak 1.0; ``PSNR_INF`` when equal."""
    if a.data.shape != b.data.shape:
        raise ValidationError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_INF
    return 10.0 * np.log10(1.0 / mse)


def degrade_pair(img, factor):
    """(bicubic down/up copy, matching crop of the original).

    The original is cropped to ``floor(dim / factor) * factor`` so both sides
    have the same size.
    """
    small = scale_down(img, factor)
    up = scale_up(small, factor)
    return up, Image(img.data[:, :up.height, :up.width], img.colorspace)
