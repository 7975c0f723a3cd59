"""Feature files: a canonical little-endian binary container and CSV.

Binary layout::

    b"LBPF"  u32 version=1  u32 record_count
    per record:
        u32 len + utf-8 image id
        u32 len + utf-8 extractor tag
        u32 n_scales, n_scales x u32 segments per scale
        u32 n_values, n_values x f32

The full segment layout is rebuilt from the tag and per-scale counts.
"""
import csv
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .lbp import (FACE_BLOCK, FACE_SIZE, MSLBP_SIZES, N_LANDMARKS, FeatureVector,
                  _grid_layout, highdim_layout, mslbp_layout)

MAGIC = b"LBPF"
VERSION = 1


def layout_summary(fv):
    """Segments per scale index."""
    if not fv.layout:
        return ()
    n = max(s.scale for s in fv.layout) + 1
    counts = [0] * n
    for s in fv.layout:
        counts[s.scale] += 1
    return tuple(counts)


def rebuild_layout(kind, summary):
    summary = tuple(summary)
    if kind == "lbp":
        g = FACE_SIZE // FACE_BLOCK
        layout = _grid_layout(g, g, 0, 0)
    elif kind == "mslbp":
        sizes = tuple(int(round((c ** 0.5))) * FACE_BLOCK for c in summary) or MSLBP_SIZES
        layout = mslbp_layout(sizes)
    elif kind == "highdim":
        layout = highdim_layout(len(summary), N_LANDMARKS)
    elif kind == "blocks" and len(summary) == 1:
        n = summary[0]
        layout = _grid_layout(1, n, 0, 0)
    else:
        layout = ()
    if layout and layout_summary(FeatureVector(np.zeros(len(layout) * 59), layout)) != summary:
        raise ValidationError(f"layout summary {summary} inconsistent with extractor {kind!r}")
    return layout


def write_features(records, path, fmt=None):
    """Write ``[(image_id, FeatureVector), ...]``; format from ``fmt`` or suffix."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image_id", "extractor", "layout", "values"])
            for image_id, fv in records:
                w.writerow([image_id, fv.kind, ";".join(map(str, layout_summary(fv))),
                            " ".join(repr(float(np.float32(x))) for x in fv.values)])
        return
    out = [MAGIC, struct.pack("<II", VERSION, len(records))]
    for image_id, fv in records:
        for text in (image_id, fv.kind):
            raw = str(text).encode("utf-8")
            out.append(struct.pack("<I", len(raw)) + raw)
        summary = layout_summary(fv)
        out.append(struct.pack(f"<I{len(summary)}I", len(summary), *summary))
        out.append(struct.pack("<I", len(fv.values)))
        out.append(np.asarray(fv.values, dtype="<f4").tobytes())
    path.write_bytes(b"".join(out))


def read_features(path):
    """Inverse of :func:`write_features`; returns ``[(image_id, FeatureVector), ...]``."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if buf[:4] != MAGIC:
        return _read_csv(path)
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise ValidationError(f"{path}: truncated feature file")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    def u32():
        return struct.unpack("<I", take(4))[0]

    version = u32()
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported feature file version {version}")
    records = []
    for _ in range(u32()):
        image_id = take(u32()).decode("utf-8")
        kind = take(u32()).decode("utf-8")
        summary = struct.unpack(f"<{(n := u32())}I", take(4 * n))
        values = np.frombuffer(take(4 * u32()), dtype="<f4").astype(np.float64)
        records.append((image_id, FeatureVector(values, rebuild_layout(kind, summary), kind)))
    if pos != len(buf):
        raise ValidationError(f"{path}: trailing bytes")
    return records


def _read_csv(path):
    records = []
    # a HighDimLBP row is a few MB of text
    csv.field_size_limit(max(csv.field_size_limit(), 1 << 28))
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            if next(reader, None) != ["image_id", "extractor", "layout", "values"]:
                raise ValidationError(f"{path}: not a feature file")
            for row in reader:
                if not row:
                    continue
                image_id, kind, layout, values = row
                summary = tuple(int(c) for c in layout.split(";") if c)
                vals = np.array([float(x) for x in values.split()], dtype=np.float64)
                records.append((image_id, FeatureVector(vals, rebuild_layout(kind, summary), kind)))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return records
