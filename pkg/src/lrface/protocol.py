"""Closed-set identification protocol: manifests, splits, rank-k scoring."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .matcher import rank_gallery

GALLERY = "gallery"
PROBE = "probe"
DEFAULT_RANKS = (1, 5, 10)
MANIFEST_HEADER = ("image_path", "identity_id", "group_id", "role")


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    identity_id: str
    group_id: int
    role: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen = set()
        for e in entries:
            if e.role not in (GALLERY, PROBE):
                raise ValidationError(f"unknown role {e.role!r} for {e.image_path}")
            key = (e.group_id, e.image_path)
            if key in seen:
                raise ValidationError(f"duplicate path {e.image_path} in group {e.group_id}")
            seen.add(key)
        groups = sorted({e.group_id for e in entries})
        if groups != list(range(1, len(groups) + 1)):
            raise ValidationError(f"group ids must be contiguous from 1, got {groups}")

    @property
    def groups(self):
        return sorted({e.group_id for e in self.entries})


def load_manifest(path):
    """Parse a ``image_path,identity_id,group_id,role`` CSV."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise ValidationError(f"{path}: header must be {','.join(MANIFEST_HEADER)}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            image_path, ident, group, role = (c.strip() for c in row)
            if role not in (GALLERY, PROBE):
                raise ValidationError(f"{path}:{lineno}: unknown role {role!r}")
            try:
                gid = int(group)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: group_id {group!r} is not an integer") from None
            if not image_path or not ident:
                raise ValidationError(f"{path}:{lineno}: empty image_path or identity_id")
            entries.append(ManifestEntry(image_path, ident, gid, role))
    return Manifest(tuple(entries))


def write_manifest(manifest, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_HEADER)
        for e in manifest.entries:
            w.writerow([e.image_path, e.identity_id, e.group_id, e.role])


@dataclass(frozen=True)
class ProtocolSplit:
    """One group: ``gallery`` and ``probes`` are (identity_id, image_ref) pairs."""

    group_id: int
    gallery: tuple
    probes: tuple

    def __post_init__(self):
        object.__setattr__(self, "gallery", tuple(self.gallery))
        object.__setattr__(self, "probes", tuple(self.probes))
        ids = [g[0] for g in self.gallery]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ValidationError(f"group {self.group_id}: gallery identities not unique: {sorted(dup)}")
        known = set(ids)
        missing = sorted({p[0] for p in self.probes} - known)
        if missing:
            raise ValidationError(f"group {self.group_id}: probe identities absent from gallery "
                                  f"(closed-set violation): {missing}")

    @property
    def gallery_refs(self):
        return tuple(g[1] for g in self.gallery)

    @property
    def probe_refs(self):
        return tuple(p[1] for p in self.probes)

    def without(self, excluded):
        """Drop excluded images; probes whose gallery entry was dropped go too."""
        excluded = set(excluded)
        gallery = [g for g in self.gallery if g[1] not in excluded]
        kept = {g[0] for g in gallery}
        probes = [p for p in self.probes if p[1] not in excluded and p[0] in kept]
        return ProtocolSplit(self.group_id, gallery, probes)


def build_split(m, group):
    entries = [e for e in m.entries if e.group_id == group]
    if not entries:
        raise ValidationError(f"group {group} not in manifest")
    gallery = [(e.identity_id, e.image_path) for e in entries if e.role == GALLERY]
    probes = [(e.identity_id, e.image_path) for e in entries if e.role == PROBE]
    return ProtocolSplit(group, gallery, probes)


@dataclass(frozen=True)
class GroupResult:
    group_id: int
    probe_count: int
    rank_k_rates: dict
    excluded: int = 0


@dataclass(frozen=True)
class RecognitionReport:
    per_group: tuple
    averaged: dict = field(default_factory=dict)

    def rate(self, k=1):
        return self.averaged[k]

    def to_dict(self):
        return {
            "per_group": [
                {"group_id": g.group_id, "probe_count": g.probe_count, "excluded": g.excluded,
                 "rank_k_rates": {str(k): v for k, v in g.rank_k_rates.items()}}
                for g in self.per_group
            ],
            "averaged": {str(k): v for k, v in self.averaged.items()},
        }


def evaluate(dm, split, ranks=DEFAULT_RANKS, excluded=0):
    """Rank-k identification rates of one group.

    A probe scores at rank k when its identity is among the first k gallery
    entries of its distance row. Ranks beyond the gallery size count as the
    whole gallery.
    """
    ranks = tuple(sorted({int(k) for k in ranks}))
    if not ranks or ranks[0] < 1:
        raise ValidationError(f"ranks must be positive, got {ranks}")
    if dm.rows != len(split.probes) or dm.cols != len(split.gallery):
        raise ValidationError(f"matrix {dm.rows}x{dm.cols} does not fit split "
                              f"{len(split.probes)}x{len(split.gallery)}")
    if tuple(dm.probe_ids) != split.probe_refs or tuple(dm.gallery_ids) != split.gallery_refs:
        raise ValidationError("matrix ids do not match the split")
    gallery_ident = np.array([g[0] for g in split.gallery], dtype=object)
    first_hit = np.empty(dm.rows, dtype=np.int64)
    for i, (ident, _) in enumerate(split.probes):
        order = rank_gallery(dm.values[i])
        first_hit[i] = int(np.flatnonzero(gallery_ident[order] == ident)[0])
    n = max(dm.rows, 1)
    rates = {k: (float(np.count_nonzero(first_hit < k)) / n if dm.rows else 0.0) for k in ranks}
    group = GroupResult(split.group_id, dm.rows, rates, excluded)
    return RecognitionReport((group,), dict(rates))


def aggregate(reports):
    """Unweighted mean over groups of each rank-k rate."""
    reports = list(reports)
    if not reports:
        raise ValidationError("no group reports to aggregate")
    groups = [g for r in reports for g in r.per_group]
    ranks = tuple(groups[0].rank_k_rates)
    if any(tuple(g.rank_k_rates) != ranks for g in groups):
        raise ValidationError("group reports use different rank lists")
    averaged = {k: math.fsum(g.rank_k_rates[k] for g in groups) / len(groups) for k in ranks}
    return RecognitionReport(tuple(groups), averaged)
