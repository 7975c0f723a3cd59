"""Face alignment stage producing 90x90 crops.

Landmarks and crop boxes are given in the 300x300 reference frame and mapped
onto the actual image with half-pixel-centre scaling.

27-point landmark order used throughout:

======  ==========================
0-3     right brow (image left)
4-7     left brow
8-11    right eye ring
12-15   left eye ring
16-20   nose
21-26   mouth ring
======  ==========================
"""
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .imgcore import Image, bicubic_sample
from .lbp import FACE_SIZE, HIGHDIM_FRAME, Landmarks

PRE_ALIGNED = "pre_aligned"
SIMILARITY_WARP = "similarity_warp"

RIGHT_EYE = (8, 9, 10, 11)
LEFT_EYE = (12, 13, 14, 15)
MOUTH = (21, 22, 23, 24, 25, 26)

#: (landmark indices, target point in the 90x90 output); each group's mean is mapped
DEFAULT_ANCHORS = (
    (RIGHT_EYE, (30.0, 36.0)),
    (LEFT_EYE, (60.0, 36.0)),
    (MOUTH, (45.0, 70.0)),
)


def _ring(cx, cy, rx, ry, n, phase=0.0):
    t = phase + 2.0 * np.pi * np.arange(n) / n
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


def face_template():
    """Canonical 27 landmark positions in 90x90 face coordinates."""
    pts = np.concatenate([
        np.stack([np.linspace(20, 38, 4), [28, 25, 25, 27]], axis=1),
        np.stack([np.linspace(52, 70, 4), [27, 25, 25, 28]], axis=1),
        _ring(30, 36, 5, 3, 4),
        _ring(60, 36, 5, 3, 4),
        np.array([[45, 40], [45, 47], [45, 54], [40, 57], [50, 57]], dtype=float),
        _ring(45, 70, 10, 4, 6),
    ])
    return pts


def frame_to_image(points, width, height, frame=HIGHDIM_FRAME):
    pts = np.asarray(points, dtype=np.float64)
    return np.stack([(pts[:, 0] + 0.5) * width / frame - 0.5,
                     (pts[:, 1] + 0.5) * height / frame - 0.5], axis=1)


def image_to_frame(points, width, height, frame=HIGHDIM_FRAME):
    pts = np.asarray(points, dtype=np.float64)
    return np.stack([(pts[:, 0] + 0.5) * frame / width - 0.5,
                     (pts[:, 1] + 0.5) * frame / height - 0.5], axis=1)


@dataclass(frozen=True)
class AlignmentStage:
    """How a 90x90 face is obtained.

    ``pre_aligned`` takes the image as is (it must be 90x90) or resamples the
    ``crop`` box ``(x, y, w, h)``, given in the 300x300 frame. ``similarity_warp``
    fits a similarity transform from the anchor landmark groups to ``anchors``.
    """

    mode: str = PRE_ALIGNED
    anchors: tuple = DEFAULT_ANCHORS
    crop: tuple = None
    landmark_source: str = None

    def __post_init__(self):
        if self.mode not in (PRE_ALIGNED, SIMILARITY_WARP):
            raise ValidationError(f"unknown alignment mode {self.mode!r}")
        if self.crop is not None and (len(self.crop) != 4 or min(self.crop[2:]) <= 0):
            raise ValidationError(f"crop must be (x, y, w, h) with positive size, got {self.crop}")

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg or {})
        anchors = cfg.get("anchors")
        if anchors is not None:
            anchors = tuple((tuple(int(i) for i in idx), tuple(float(c) for c in xy)) for idx, xy in anchors)
        else:
            anchors = DEFAULT_ANCHORS
        crop = cfg.get("crop")
        return cls(cfg.get("mode", PRE_ALIGNED), anchors, tuple(crop) if crop else None,
                   cfg.get("landmark_source"))


def fit_similarity(src, dst):
    """Least-squares ``dst ~ a * src + b`` with a, b complex (scale+rotation, shift)."""
    p = np.asarray(src, dtype=np.float64) @ np.array([1.0, 1j])
    q = np.asarray(dst, dtype=np.float64) @ np.array([1.0, 1j])
    pc, qc = p - p.mean(), q - q.mean()
    denom = np.sum(np.abs(pc) ** 2)
    if denom == 0:
        raise ValidationError("degenerate anchor landmarks (all coincide)")
    a = np.sum(qc * np.conj(pc)) / denom
    return a, q.mean() - a * p.mean()


def _sample_grid(img, xs, ys):
    planes = [bicubic_sample(img.data[c], xs, ys) for c in range(img.channels)]
    return Image(np.clip(np.stack(planes), 0.0, 1.0), img.colorspace)


def align_face(img, lm, stage):
    """Return the 90x90 face for ``img`` according to ``stage``."""
    if stage.mode == PRE_ALIGNED:
        if stage.crop is None:
            if img.size != (FACE_SIZE, FACE_SIZE):
                raise ValidationError(f"pre-aligned face must be {FACE_SIZE}x{FACE_SIZE}, got "
                                      f"{img.width}x{img.height}")
            return img
        x, y, w, h = stage.crop
        # box edges scale with the frame; sample at output pixel centres
        kx, ky = img.width / HIGHDIM_FRAME, img.height / HIGHDIM_FRAME
        u = np.arange(FACE_SIZE) + 0.5
        xs, ys = np.meshgrid(x * kx + u * (w * kx / FACE_SIZE) - 0.5,
                             y * ky + u * (h * ky / FACE_SIZE) - 0.5)
        return _sample_grid(img, xs, ys)
    if lm is None:
        raise ValidationError("similarity warp needs landmarks")
    if not isinstance(lm, Landmarks):
        lm = Landmarks(lm)
    pts = frame_to_image(lm.points, img.width, img.height)
    src = np.array([pts[list(idx)].mean(axis=0) for idx, _ in stage.anchors])
    dst = np.array([xy for _, xy in stage.anchors], dtype=np.float64)
    a, b = fit_similarity(src, dst)
    v, u = np.mgrid[0:FACE_SIZE, 0:FACE_SIZE]
    z = ((u + 1j * v) - b) / a
    return _sample_grid(img, z.real, z.imag)


def load_landmarks(path):
    """Read 27 ``x,y`` rows (an optional ``x,y`` header is skipped)."""
    rows = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.lower().replace(" ", "") == "x,y":
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise ValidationError(f"{path}:{lineno}: expected 'x,y'")
                try:
                    rows.append((float(parts[0]), float(parts[1])))
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: non-numeric coordinate") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    try:
        return Landmarks(np.array(rows).reshape(-1, 2))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def save_landmarks(lm, path):
    pts = lm.points if isinstance(lm, Landmarks) else np.asarray(lm)
    with open(path, "w") as fh:
        for x, y in pts:
            fh.write(f"{float(x)!r},{float(y)!r}\n")
