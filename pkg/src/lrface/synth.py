"""Synthetic textured "faces" for tests, demos and the desk SR trainer.

Each identity is a fixed RGB texture (smooth shading, dark blobs near the
template eyes/mouth, fine detail). Individual images add noise and an
illumination ramp. Originals place the face into a larger canvas with a
small per-image rotation, scale and shift; landmarks follow the same map.
"""
import json
import math
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .align import face_template, image_to_frame
from .imgcore import Image, bicubic_sample, degrade_pair, save_image
from .lbp import FACE_SIZE, Landmarks
from .protocol import Manifest, ManifestEntry, write_manifest
from .srcnn import identity_model, save_weights


def smooth_noise(rng, shape, sigma):
    field = gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return field / (field.std() + 1e-12)


def texture_image(rng, size=64, channels=1):
    """Random sharp-edged shapes over smooth shading, values in [0, 1].

    Used as SR training and held-out material: the edges are what bicubic
    upsampling blurs and a learned filter can restore.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    base = 0.5 + 0.08 * smooth_noise(rng, (size, size), 6.0)
    for _ in range(int(rng.integers(6, 12))):
        level = rng.uniform(-0.35, 0.35)
        cx, cy = rng.uniform(0, size, 2)
        if rng.random() < 0.5:
            r = rng.uniform(3, size / 4)
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
        else:
            hw, hh = rng.uniform(2, size / 4, 2)
            mask = (np.abs(xx - cx) < hw) & (np.abs(yy - cy) < hh)
        base = np.where(mask, base + level, base)
    base = gaussian_filter(base, 0.5, mode="nearest")
    planes = [base + 0.005 * rng.standard_normal((size, size)) for _ in range(channels)]
    return Image(np.clip(np.stack(planes), 0.0, 1.0))


def identity_face(rng):
    """Clean 90x90 RGB face texture of one identity."""
    n = FACE_SIZE
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    skin = rng.uniform(0.45, 0.75, 3)
    shade = 0.10 * smooth_noise(rng, (n, n), 6.0)
    detail = 0.07 * smooth_noise(rng, (n, n), 1.3)
    lum = shade + detail
    for cx, cy, sx, sy in ((30, 36, 6, 3.5), (60, 36, 6, 3.5), (45, 70, 10, 3.5), (45, 50, 3, 6)):
        cx, cy = cx + rng.normal(0, 1.5), cy + rng.normal(0, 1.5)
        sx, sy = sx * rng.uniform(0.7, 1.3), sy * rng.uniform(0.7, 1.3)
        lum -= rng.uniform(0.15, 0.35) * np.exp(-((xx - cx) ** 2 / (2 * sx ** 2) + (yy - cy) ** 2 / (2 * sy ** 2)))
    planes = [skin[c] + lum * (0.9 + 0.2 * rng.random()) for c in range(3)]
    return np.clip(np.stack(planes), 0.0, 1.0)


def observe(rng, face, noise=0.02, ramp=0.05, shading=0.0):
    """One photo of an identity: illumination ramp, smooth shading, sensor noise."""
    n = face.shape[1]
    yy, xx = np.mgrid[0:n, 0:n] / n
    angle = rng.uniform(0, 2 * np.pi)
    light = ramp * (np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5))
    if shading:
        light = light + shading * smooth_noise(rng, (n, n), 8.0)
    out = face + light + noise * rng.standard_normal(face.shape)
    return np.clip(out, 0.0, 1.0)


def place_in_frame(rng, face, frame, scale, jitter=True):
    """Render a face into a frame x frame canvas; returns (image, face->frame map)."""
    angle = math.radians(rng.uniform(-6, 6)) if jitter else 0.0
    s = scale * (rng.uniform(0.95, 1.05) if jitter else 1.0)
    a = s * complex(math.cos(angle), math.sin(angle))
    centre = complex(frame / 2 - 0.5, frame / 2 - 0.5)
    shift = complex(*rng.uniform(-3, 3, 2)) if jitter else 0j
    b = centre + shift - a * complex(FACE_SIZE / 2 - 0.5, FACE_SIZE / 2 - 0.5)
    v, u = np.mgrid[0:frame, 0:frame]
    z = ((u + 1j * v) - b) / a
    inside = (z.real > -0.5) & (z.real < FACE_SIZE - 0.5) & (z.imag > -0.5) & (z.imag < FACE_SIZE - 0.5)
    bg = 0.35 + 0.1 * smooth_noise(rng, (frame, frame), 3.0)
    planes = []
    for c in range(face.shape[0]):
        plane = bicubic_sample(face[c], z.real, z.imag)
        planes.append(np.where(inside, plane, bg))
    return Image(np.clip(np.stack(planes), 0.0, 1.0)), (a, b)


def map_points(points, a, b):
    z = a * (points[:, 0] + 1j * points[:, 1]) + b
    return np.stack([z.real, z.imag], axis=1)


def generate_corpus(out_dir, identities=6, groups=2, probes_per_identity=2, frame=150,
                    face_scale=1.0, noise=0.02, copies=False, seed=0, weights=None,
                    shading=0.0, kinship=0.0):
    """Write images, aligned faces, landmarks, a manifest and ``experiment.json``.

    ``copies=True`` makes every probe an exact copy of its gallery image.
    ``shading`` adds a smooth per-photo lighting field and ``kinship`` in
    [0, 1) blends every identity towards one shared face; both make the
    corpus harder.
    """
    out = Path(out_dir)
    for sub in ("images", "aligned", "landmarks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    template = face_template()
    faces = [identity_face(rng) for _ in range(identities)]
    if kinship:
        common = identity_face(rng)
        faces = [kinship * common + (1.0 - kinship) * f for f in faces]
    entries = []
    for g in range(1, groups + 1):
        for i, face in enumerate(faces):
            gal = observe(rng, face, noise, shading=shading)
            rendered = place_in_frame(rng, gal, frame, face_scale, jitter=not copies)
            for k in range(probes_per_identity + 1):
                role = "gallery" if k == 0 else "probe"
                if copies or k == 0:
                    arr, (img, (a, b)) = gal, rendered
                else:
                    arr = observe(rng, face, noise, shading=shading)
                    img, (a, b) = place_in_frame(rng, arr, frame, face_scale)
                name = f"g{g}_id{i:03d}_{k}"
                save_image(img, out / "images" / f"{name}.png")
                save_image(Image(arr), out / "aligned" / f"{name}.png")
                _write_lm(out / "landmarks" / f"{name}.csv", template, a, b, frame)
                entries.append(ManifestEntry(f"images/{name}.png", f"id{i:03d}", g, role))
    write_manifest(Manifest(tuple(entries)), out / "manifest.csv")
    if weights is None:
        weights = "identity.srcw"
        save_weights(identity_model(1), out / weights)
    config = {
        "manifest": "manifest.csv",
        "variants": ["baseline", "e1_sr", "e1_bicubic", "e2_sr", "e2_bicubic"],
        "features": ["lbp", "mslbp"],
        "scale_factor": 3,
        "weights": str(weights),
        "alignment": {"mode": "similarity_warp"},
        "aligned_pattern": "{dir}/../aligned/{stem}.png",
        "landmark_pattern": "{dir}/../landmarks/{stem}.csv",
        "output_dir": "report",
        "seed": seed,
        "ranks": [1, 5, 10],
        "pca_dim": min(400, identities - 1),
    }
    (out / "experiment.json").write_text(json.dumps(config, indent=2) + "\n")
    return out / "manifest.csv"


def _write_lm(path, template, a, b, frame):
    pts = image_to_frame(map_points(template, a, b), frame, frame)
    lm = Landmarks(pts)
    with open(path, "w") as fh:
        for x, y in lm.points:
            fh.write(f"{x:.6f},{y:.6f}\n")


def sr_patch_pairs(n_pairs, patch=16, factor=3, seed=0, image_size=48):
    """(degraded, clean) gray patch pairs cut from degraded whole textures."""
    rng = np.random.default_rng(seed)
    pairs = []
    per_image = 4
    while len(pairs) < n_pairs:
        clean = texture_image(rng, image_size)
        degraded, clean = degrade_pair(clean, factor)
        for _ in range(per_image):
            if len(pairs) >= n_pairs:
                break
            y, x = rng.integers(0, clean.height - patch + 1), rng.integers(0, clean.width - patch + 1)
            pairs.append((degraded.data[:, y:y + patch, x:x + patch].copy(),
                          clean.data[:, y:y + patch, x:x + patch].copy()))
    return pairs
