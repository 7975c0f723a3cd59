"""Degradation/SR/feature pipelines and the experiment runner.

Variants::

    baseline    aligned face, no degradation                    "lfw3D"
    e1_bicubic  aligned face -> down x s -> bicubic up x s       "lfw3D bicubic 3 channels"
    e1_sr       ... -> SRCNN                                     "lfw3D SR 3 channels"
    e2_bicubic  full image -> down/up -> align                   "lfw bicubic 3 channels orig."
    e2_sr       full image -> down/up -> SRCNN -> align          "lfw SR 3 channels orig."

The HighDimLBP kinds work on the 300x300 frame with landmarks and skip
alignment, so for them e1 and e2 coincide.
"""
import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .align import PRE_ALIGNED, AlignmentStage, align_face, load_landmarks
from .errors import StageError, ValidationError
from .imgcore import bicubic_resize, load_image, scale_down, to_gray
from .lbp import (FACE_SIZE, HIGHDIM_FRAME, extract_highdim_lbp, extract_lbp,
                  extract_mslbp, pca_fit, pca_project)
from .matcher import distance_matrix
from .protocol import DEFAULT_RANKS, aggregate, build_split, evaluate, load_manifest
from .srcnn import forward, load_weights

log = logging.getLogger(__name__)

VARIANTS = ("baseline", "e1_sr", "e1_bicubic", "e2_sr", "e2_bicubic")
VARIANT_LABELS = {
    "baseline": "lfw3D",
    "e1_sr": "lfw3D SR 3 channels",
    "e1_bicubic": "lfw3D bicubic 3 channels",
    "e2_sr": "lfw SR 3 channels orig.",
    "e2_bicubic": "lfw bicubic 3 channels orig.",
}
FEATURE_KINDS = ("lbp", "mslbp", "highdim", "highdim_pca")
FEATURE_LABELS = {
    "lbp": "LBP",
    "mslbp": "Multi-Scale LBP",
    "highdim": "HighDimLBP",
    "highdim_pca": "HighDimLBP+PCA",
}
TABLE_FEATURES = ("lbp", "mslbp")


@dataclass(frozen=True)
class PipelineVariant:
    name: str
    feature_kind: str = "lbp"
    scale_factor: int = 3
    sr_model: str = None

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise ValidationError(f"unknown variant {self.name!r}; choose from {VARIANTS}")
        if self.feature_kind not in FEATURE_KINDS:
            raise ValidationError(f"unknown feature kind {self.feature_kind!r}")
        if int(self.scale_factor) < 1:
            raise ValidationError("scale_factor must be >= 1")
        if self.is_sr and not self.sr_model:
            raise ValidationError(f"variant {self.name} needs an SR weight file")
        if not self.is_sr and self.sr_model:
            raise ValidationError(f"variant {self.name} must not reference an SR model")

    @property
    def is_sr(self):
        return self.name.endswith("_sr")

    @property
    def degrades(self):
        return self.name != "baseline"

    @property
    def experiment(self):
        return 2 if self.name.startswith("e2") else 1

    @property
    def label(self):
        return VARIANT_LABELS[self.name]


def degrade(img, factor):
    """Down by ``factor`` (floor), then bicubic up by the same factor."""
    small = scale_down(img, factor)
    return bicubic_resize(small, small.width * factor, small.height * factor)


def _enhance(img, variant, model):
    if not variant.degrades:
        return img
    out = degrade(img, int(variant.scale_factor))
    if variant.is_sr:
        if model is None:
            raise ValidationError(f"variant {variant.name} needs a loaded SR model")
        out = forward(model, out)
    return out


def face_features(face90, kind):
    gray = to_gray(face90)
    if kind == "lbp":
        return extract_lbp(gray)
    if kind == "mslbp":
        return extract_mslbp(gray)
    raise ValidationError(f"{kind} is not a face-crop feature")


def pipeline_e1(face90, variant, model=None):
    """Experiment 1: alignment happened first; degrade/SR the 90x90 face."""
    if face90.size != (FACE_SIZE, FACE_SIZE):
        raise ValidationError(f"experiment 1 needs a {FACE_SIZE}x{FACE_SIZE} face, got {face90.width}x{face90.height}")
    return face_features(_enhance(face90, variant, model), variant.feature_kind)


def pipeline_e2(full_img, lm, variant, model=None, stage=AlignmentStage()):
    """Experiment 2: degrade/SR the full image, then align to 90x90."""
    processed = _enhance(full_img, variant, model)
    return face_features(align_face(processed, lm, stage), variant.feature_kind)


def highdim_frame(img):
    if img.size == (HIGHDIM_FRAME, HIGHDIM_FRAME):
        return img
    return bicubic_resize(img, HIGHDIM_FRAME, HIGHDIM_FRAME)


def pipeline_highdim(full_img, lm, variant, model=None):
    """HighDimLBP on the degraded/SR 300x300 frame (no alignment)."""
    frame = _enhance(highdim_frame(full_img), variant, model)
    return extract_highdim_lbp(to_gray(frame), lm)


# -- experiment runner ------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    manifest: Path
    variants: tuple = VARIANTS
    features: tuple = TABLE_FEATURES
    scale_factor: int = 3
    weights: Path = None
    alignment: AlignmentStage = AlignmentStage()
    aligned_pattern: str = None
    landmark_pattern: str = None
    output_dir: Path = Path("report")
    seed: int = 0
    ranks: tuple = DEFAULT_RANKS
    pca_dim: int = 400
    workers: int = 1

    @classmethod
    def from_dict(cls, d, base=Path(".")):
        base = Path(base)
        unknown = set(d) - {"manifest", "variants", "features", "scale_factor", "weights",
                            "alignment", "aligned_pattern", "landmark_pattern", "output_dir",
                            "seed", "ranks", "pca_dim", "workers"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "manifest" not in d:
            raise ValidationError("config needs a 'manifest' path")

        def rel(p):
            return None if p is None else (base / p)

        variants = tuple(d.get("variants", VARIANTS))
        features = tuple(d.get("features", TABLE_FEATURES))
        for k in features:
            if k not in FEATURE_KINDS:
                raise ValidationError(f"unknown feature kind {k!r}")
        cfg = cls(
            manifest=rel(d["manifest"]),
            variants=variants,
            features=features,
            scale_factor=int(d.get("scale_factor", 3)),
            weights=rel(d.get("weights")),
            alignment=AlignmentStage.from_config(d.get("alignment")),
            aligned_pattern=d.get("aligned_pattern"),
            landmark_pattern=d.get("landmark_pattern"),
            output_dir=rel(d.get("output_dir", "report")),
            seed=int(d.get("seed", 0)),
            ranks=tuple(int(k) for k in d.get("ranks", DEFAULT_RANKS)),
            pca_dim=int(d.get("pca_dim", 400)),
            workers=max(1, int(d.get("workers", 1))),
        )
        for v in variants:
            cfg.variant(v, features[0] if features else "lbp")
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"{path}: {exc}") from None
        return cls.from_dict(d, path.parent)

    def variant(self, name, kind):
        return PipelineVariant(name, kind, self.scale_factor,
                               str(self.weights) if name.endswith("_sr") and self.weights else None)


def resolve_pattern(pattern, image_path):
    p = Path(image_path)
    return Path(pattern.format(dir=str(p.parent), stem=p.stem, name=p.name))


class _Sources:
    """Lazily loaded, cached inputs per image."""

    def __init__(self, cfg, root):
        self.cfg = cfg
        self.root = Path(root)
        self._cache = {}

    def _path(self, image_path):
        p = Path(image_path)
        return p if p.is_absolute() else self.root / p

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def original(self, ref):
        return self._get(("orig", ref), lambda: load_image(self._path(ref)))

    def landmarks(self, ref):
        if not self.cfg.landmark_pattern:
            raise ValidationError("no landmark_pattern configured")
        return self._get(("lm", ref), lambda: load_landmarks(
            resolve_pattern(self.cfg.landmark_pattern, self._path(ref))))

    def aligned(self, ref):
        """The pre-computed aligned face, or the alignment stage applied to the original."""
        def make():
            if self.cfg.aligned_pattern:
                return align_face(load_image(resolve_pattern(self.cfg.aligned_pattern, self._path(ref))),
                                  None, AlignmentStage(PRE_ALIGNED))
            lm = self.landmarks(ref) if self.cfg.alignment.mode != PRE_ALIGNED else None
            return align_face(self.original(ref), lm, self.cfg.alignment)
        return self._get(("aligned", ref), make)


def _extract_one(sources, ref, variant, model, stage):
    step = "load"
    try:
        if variant.feature_kind.startswith("highdim"):
            img, lm = sources.original(ref), sources.landmarks(ref)
            step = "highdim"
            return pipeline_highdim(img, lm, PipelineVariant(
                variant.name, "highdim", variant.scale_factor, variant.sr_model), model)
        if variant.experiment == 1:
            face = sources.aligned(ref)
            step = "e1"
            return pipeline_e1(face, variant, model)
        img = sources.original(ref)
        lm = sources.landmarks(ref) if stage.mode != PRE_ALIGNED else None
        step = "e2"
        return pipeline_e2(img, lm, variant, model, stage)
    except (ValidationError, ValueError, OSError) as exc:
        raise StageError(ref, step, exc) from exc


def run_experiment(cfg):
    """Run every variant x feature kind; write reports into ``cfg.output_dir``.

    Returns the result dict that is also written as ``report.json``.
    """
    manifest = load_manifest(cfg.manifest)
    model = load_weights(cfg.weights) if any(v.endswith("_sr") for v in cfg.variants) else None
    if model is None and any(v.endswith("_sr") for v in cfg.variants):
        raise ValidationError("SR variants need 'weights'")
    sources = _Sources(cfg, Path(cfg.manifest).parent)
    splits = [build_split(manifest, g) for g in manifest.groups]
    refs = sorted({ref for s in splits for ref in s.gallery_refs + s.probe_refs})
    results, failures = {}, []

    for vname in cfg.variants:
        for kind in cfg.features:
            variant = cfg.variant(vname, kind)
            feats, failed = _extract_all(sources, refs, variant, model, cfg)
            failures.extend((vname, kind, ref, err.stage, str(err.cause)) for ref, err in failed.items())
            reports, group_errors = [], []
            for split in splits:
                sub = split.without(failed)
                excluded = len(split.probes) + len(split.gallery) - len(sub.probes) - len(sub.gallery)
                if not sub.probes or not sub.gallery:
                    group_errors.append(split.group_id)
                    continue
                gal = [feats[r] for r in sub.gallery_refs]
                prb = [feats[r] for r in sub.probe_refs]
                metric = "chi2"
                if kind == "highdim_pca":
                    try:
                        pca = pca_fit(gal, min(cfg.pca_dim, len(gal[0])))
                    except ValidationError as exc:
                        raise ValidationError(f"group {split.group_id}: {exc}") from None
                    gal = [pca_project(pca, v) for v in gal]
                    prb = [pca_project(pca, v) for v in prb]
                    metric = "l2"
                dm = distance_matrix(prb, gal, sub.probe_refs, sub.gallery_refs, metric=metric)
                reports.append(evaluate(dm, sub, cfg.ranks, excluded=excluded))
            entry = {"variant": vname, "label": variant.label, "feature": kind,
                     "feature_label": FEATURE_LABELS[kind], "failed_images": len(failed),
                     "unevaluable_groups": group_errors}
            if reports:
                entry.update(aggregate(reports).to_dict())
            results[(vname, kind)] = entry

    failures.sort()
    out = {
        "config": {"variants": list(cfg.variants), "features": list(cfg.features),
                   "scale_factor": cfg.scale_factor, "alignment_mode": cfg.alignment.mode,
                   "ranks": list(cfg.ranks), "seed": cfg.seed, "pca_dim": cfg.pca_dim,
                   "landmarks": "rescaled from reference frame, not re-detected"},
        "results": [results[(v, k)] for v in cfg.variants for k in cfg.features],
        "failures": [dict(zip(("variant", "feature", "image", "stage", "error"), f)) for f in failures],
    }
    write_reports(out, cfg.output_dir)
    return out


def _extract_all(sources, refs, variant, model, cfg):
    def job(ref):
        try:
            return ref, _extract_one(sources, ref, variant, model, cfg.alignment), None
        except StageError as err:
            log.warning("%s", err)
            return ref, None, err

    feats, failed = {}, {}
    if cfg.workers > 1:
        # warm the shared cache serially so threads only read it
        for ref in refs:
            try:
                _touch(sources, ref, variant, cfg)
            except (ValidationError, OSError):
                pass
        with ThreadPoolExecutor(cfg.workers) as pool:
            out = list(pool.map(job, refs))
    else:
        out = [job(ref) for ref in refs]
    for ref, fv, err in out:
        if err is None:
            feats[ref] = fv
        else:
            failed[ref] = err
    return feats, failed


def _touch(sources, ref, variant, cfg):
    if variant.feature_kind.startswith("highdim") or variant.experiment == 2:
        sources.original(ref)
        if cfg.landmark_pattern:
            sources.landmarks(ref)
    if variant.experiment == 1 and not variant.feature_kind.startswith("highdim"):
        sources.aligned(ref)


def _pct(entry, rank=1):
    if "averaged" not in entry:
        return "NA"
    return f"{100.0 * entry['averaged'][str(rank)]:.2f}"


def rank1_table_csv(out):
    """Variant rows x (LBP, Multi-Scale LBP) rank-1 percentages."""
    feats = [k for k in TABLE_FEATURES if k in out["config"]["features"]]
    by = {(r["variant"], r["feature"]): r for r in out["results"]}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", *(FEATURE_LABELS[k] for k in feats)])
    for v in VARIANTS:
        if v in out["config"]["variants"]:
            w.writerow([VARIANT_LABELS[v], *(_pct(by[(v, k)]) for k in feats)])
    return buf.getvalue()


def feature_comparison_csv(out):
    """Baseline rank-1 percentage per feature kind."""
    by = {(r["variant"], r["feature"]): r for r in out["results"]}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "rank1_percent"])
    if "baseline" in out["config"]["variants"]:
        for k in FEATURE_KINDS:
            if k in out["config"]["features"]:
                w.writerow([FEATURE_LABELS[k], _pct(by[("baseline", k)])])
    return buf.getvalue()


def plot_data_csv(out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "label", "feature", "rank", "rate_percent"])
    for r in out["results"]:
        for k, rate in r.get("averaged", {}).items():
            w.writerow([r["variant"], r["label"], r["feature"], k, f"{100.0 * rate:.4f}"])
    return buf.getvalue()


def failures_csv(out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "feature", "image", "stage", "error"])
    for f in out["failures"]:
        w.writerow([f["variant"], f["feature"], f["image"], f["stage"], f["error"]])
    return buf.getvalue()


def write_reports(out, output_dir):
    d = Path(output_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    (d / "rank1_table.csv").write_text(rank1_table_csv(out))
    (d / "feature_comparison.csv").write_text(feature_comparison_csv(out))
    (d / "plot_data.csv").write_text(plot_data_csv(out))
    (d / "failures.csv").write_text(failures_csv(out))
