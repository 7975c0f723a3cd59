"""Chi-square histogram distance, probe x gallery matrices, ranking."""
import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ValidationError
from .lbp import FeatureVector


def _values(v):
    return v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64).reshape(-1)


def chi_square(x, y):
    """sum (x_i - y_i)^2 / (x_i + y_i); bins where x_i + y_i == 0 add nothing."""
    a, b = _values(x), _values(y)
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch {a.size} vs {b.size}")
    if (a < 0).any() or (b < 0).any():
        raise ValidationError("chi-square needs non-negative histograms")
    num = (a - b) ** 2
    den = a + b
    return float(np.sum(np.divide(num, den, out=np.zeros_like(num), where=den != 0)))


def euclidean_matrix(probes, gallery):
    sq = (probes ** 2).sum(1)[:, None] + (gallery ** 2).sum(1)[None, :] - 2.0 * probes @ gallery.T
    return np.sqrt(np.maximum(sq, 0.0))


METRICS = ("chi2", "l2")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray  # (probes, gallery)
    probe_ids: tuple = field(default_factory=tuple)
    gallery_ids: tuple = field(default_factory=tuple)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValidationError("distance matrix must be 2-D")
        if not np.all(np.isfinite(v)) or (v < 0).any():
            raise ValidationError("distances must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        pids = tuple(self.probe_ids) or tuple(f"p{i}" for i in range(v.shape[0]))
        gids = tuple(self.gallery_ids) or tuple(f"g{j}" for j in range(v.shape[1]))
        if len(pids) != v.shape[0] or len(gids) != v.shape[1]:
            raise ValidationError("id lists do not match matrix shape")
        object.__setattr__(self, "probe_ids", pids)
        object.__setattr__(self, "gallery_ids", gids)

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    def __eq__(self, other):
        return (isinstance(other, DistanceMatrix) and self.probe_ids == other.probe_ids
                and self.gallery_ids == other.gallery_ids and np.array_equal(self.values, other.values))


def distance_matrix(probes, gallery, probe_ids=(), gallery_ids=(), metric="chi2"):
    """Entry (i, j) is the distance from probe i to gallery item j."""
    probes, gallery = list(probes), list(gallery)
    if not probes or not gallery:
        raise ValidationError("probe and gallery lists must be non-empty")
    p = np.vstack([_values(v) for v in probes]) if len({len(_values(v)) for v in probes}) == 1 else None
    g = np.vstack([_values(v) for v in gallery]) if len({len(_values(v)) for v in gallery}) == 1 else None
    if p is None or g is None or p.shape[1] != g.shape[1]:
        raise ValidationError("all feature vectors must have the same length")
    if metric == "chi2":
        if (p < 0).any() or (g < 0).any():
            raise ValidationError("chi-square needs non-negative histograms")
        vals = kernels.chi2_matrix(p, g)
    elif metric == "l2":
        vals = euclidean_matrix(p, g)
    else:
        raise ValidationError(f"unknown metric {metric!r}; choose from {METRICS}")
    return DistanceMatrix(vals, probe_ids, gallery_ids)


def rank_gallery(row):
    """Gallery indices by ascending distance; ties keep index order."""
    row = np.asarray(row, dtype=np.float64)
    if row.size == 0:
        raise ValidationError("empty distance row")
    return np.argsort(row, kind="stable")


def write_matrix_csv(dm, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["probe_id", *dm.gallery_ids])
        for pid, row in zip(dm.probe_ids, dm.values):
            w.writerow([pid, *(repr(float(x)) for x in row)])


def read_matrix_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if len(rows) < 2 or not rows[0] or rows[0][0] != "probe_id":
        raise ValidationError(f"{path}: not a distance-matrix CSV")
    gids = tuple(rows[0][1:])
    try:
        vals = [[float(x) for x in r[1:]] for r in rows[1:]]
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if any(len(r) != len(gids) for r in vals):
        raise ValidationError(f"{path}: ragged rows")
    return DistanceMatrix(np.array(vals), tuple(r[0] for r in rows[1:]), gids)
