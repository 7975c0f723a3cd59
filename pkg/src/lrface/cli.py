"""Command-line entry point: ``lrface <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input, 2 when a processing stage
fails.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .align import load_landmarks
from .errors import StageError, ValidationError
from .featio import read_features, write_features
from .imgcore import bicubic_resize, degrade_pair, load_image, psnr, save_image, to_gray
from .lbp import extract_highdim_lbp, extract_lbp, extract_mslbp
from .matcher import distance_matrix, read_matrix_csv, write_matrix_csv
from .pipeline import ExperimentConfig, highdim_frame, resolve_pattern, run_experiment
from .protocol import DEFAULT_RANKS, GALLERY, PROBE, build_split, evaluate, load_manifest
from .srcnn import (DEFAULT_ARCH, DESK_ARCH, forward, load_weights, near_identity_model,
                    save_weights, train_patches)
from .synth import generate_corpus, sr_patch_pairs, texture_image

log = logging.getLogger("lrface")


def cmd_resize(args):
    img = load_image(args.input)
    if args.size:
        w, h = (int(v) for v in args.size.lower().split("x"))
    elif args.down:
        w, h = img.width // args.scale, img.height // args.scale
    else:
        w, h = img.width * args.scale, img.height * args.scale
    save_image(bicubic_resize(img, w, h, antialias=not args.no_antialias), args.output)
    print(f"{args.input}: {img.width}x{img.height} -> {w}x{h}")


def cmd_sr(args):
    model = load_weights(args.weights)
    out_dir = Path(args.out_dir)
    for path in args.images:
        img = load_image(path)
        if args.upscale > 1:
            img = bicubic_resize(img, img.width * args.upscale, img.height * args.upscale)
        save_image(forward(model, img), out_dir / Path(path).name)
    print(f"wrote {len(args.images)} image(s) to {out_dir}")


def _feature_inputs(args):
    if args.manifest:
        m = load_manifest(args.manifest)
        root = Path(args.manifest).parent
        entries = [e for e in m.entries
                   if (args.group is None or e.group_id == args.group)
                   and (args.role is None or e.role == args.role)]
        return [(e.image_path, root / e.image_path) for e in entries]
    return [(p, Path(p)) for p in args.images]


def cmd_features(args):
    records = []
    for image_id, path in _feature_inputs(args):
        try:
            if args.aligned and args.kind != "highdim":
                path = resolve_pattern(args.aligned, path)
            img = to_gray(load_image(path))
            if args.kind == "lbp":
                fv = extract_lbp(img)
            elif args.kind == "mslbp":
                fv = extract_mslbp(img)
            else:
                if not args.landmarks:
                    raise ValidationError("highdim features need --landmarks PATTERN")
                lm = load_landmarks(resolve_pattern(args.landmarks, path))
                fv = extract_highdim_lbp(highdim_frame(img), lm)
        except ValidationError as exc:
            raise StageError(image_id, f"features/{args.kind}", exc) from exc
        records.append((image_id, fv))
    write_features(records, args.output, args.format)
    print(f"wrote {len(records)} {args.kind} vectors to {args.output}")


def cmd_match(args):
    probes = read_features(args.probes)
    gallery = read_features(args.gallery)
    dm = distance_matrix([f for _, f in probes], [f for _, f in gallery],
                         [i for i, _ in probes], [i for i, _ in gallery], metric=args.metric)
    write_matrix_csv(dm, args.output)
    print(f"wrote {dm.rows}x{dm.cols} distance matrix to {args.output}")


def reorder_matrix(dm, split):
    """Rows/columns of ``dm`` picked in split order by image id."""
    from .matcher import DistanceMatrix
    rpos = {pid: i for i, pid in enumerate(dm.probe_ids)}
    cpos = {gid: j for j, gid in enumerate(dm.gallery_ids)}
    missing = [r for r in split.probe_refs if r not in rpos] + [g for g in split.gallery_refs if g not in cpos]
    if missing:
        raise ValidationError(f"matrix lacks ids from the split: {missing[:5]}")
    vals = dm.values[np.ix_([rpos[r] for r in split.probe_refs], [cpos[g] for g in split.gallery_refs])]
    return DistanceMatrix(vals, split.probe_refs, split.gallery_refs)


def cmd_eval(args):
    split = build_split(load_manifest(args.manifest), args.group)
    dm = reorder_matrix(read_matrix_csv(args.matrix), split)
    report = evaluate(dm, split, args.ranks)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config)
    if args.output_dir:
        cfg = ExperimentConfig(**{**cfg.__dict__, "output_dir": Path(args.output_dir)})
    out = run_experiment(cfg)
    print((Path(cfg.output_dir) / "rank1_table.csv").read_text(), end="")
    if out["failures"]:
        print(f"{len(out['failures'])} image/stage failures, see failures.csv", file=sys.stderr)
    if any("averaged" not in r for r in out["results"]):
        return 2
    return 0


def cmd_train_sr(args):
    arch = DESK_ARCH if args.arch == "desk" else DEFAULT_ARCH
    model = near_identity_model(arch, seed=args.seed)
    pairs = sr_patch_pairs(args.pairs, patch=args.patch, factor=args.factor, seed=args.seed)
    model, trace = train_patches(model, pairs, args.rate, args.epochs, batch_size=args.batch, seed=args.seed)
    save_weights(model, args.output)
    rng = np.random.default_rng(args.seed + 1)
    held = [degrade_pair(texture_image(rng, 48), args.factor) for _ in range(args.held_out)]
    bic = float(np.mean([psnr(d, c) for d, c in held]))
    sr = float(np.mean([psnr(forward(model, d), c) for d, c in held]))
    for e, loss in enumerate(trace):
        print(f"epoch {e:3d}  loss {loss:.6g}")
    print(f"held-out PSNR: bicubic {bic:.3f} dB, SR {sr:.3f} dB ({sr - bic:+.3f})")
    print(f"wrote {args.output}")


def cmd_synth(args):
    manifest = generate_corpus(args.out_dir, identities=args.identities, groups=args.groups,
                               probes_per_identity=args.probes, frame=args.frame,
                               noise=args.noise, copies=args.copies, seed=args.seed,
                               weights=args.weights, shading=args.shading, kinship=args.kinship)
    print(f"wrote {manifest} and {Path(args.out_dir) / 'experiment.json'}")


def build_parser():
    p = argparse.ArgumentParser(prog="lrface", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("resize", help="bicubic scaling of one image")
    s.add_argument("input")
    s.add_argument("output")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--scale", type=int)
    g.add_argument("--size", help="WxH")
    s.add_argument("--down", action="store_true", help="shrink by --scale instead of enlarging")
    s.add_argument("--no-antialias", action="store_true")
    s.set_defaults(func=cmd_resize)

    s = sub.add_parser("sr", help="apply an SRCNN weight file to images")
    s.add_argument("images", nargs="+")
    s.add_argument("--weights", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--upscale", type=int, default=1, help="bicubic enlargement before SR")
    s.set_defaults(func=cmd_sr)

    s = sub.add_parser("features", help="extract LBP descriptors to a feature file")
    s.add_argument("images", nargs="*")
    s.add_argument("--kind", choices=("lbp", "mslbp", "highdim"), required=True)
    s.add_argument("--manifest")
    s.add_argument("--group", type=int)
    s.add_argument("--role", choices=(GALLERY, PROBE))
    s.add_argument("--landmarks", help="landmark path pattern, e.g. '{dir}/{stem}.csv'")
    s.add_argument("--aligned", help="path pattern of the 90x90 face for each image (lbp, mslbp)")
    s.add_argument("--format", choices=("bin", "csv"))
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("match", help="probe x gallery distance matrix")
    s.add_argument("probes")
    s.add_argument("gallery")
    s.add_argument("--metric", choices=("chi2", "l2"), default="chi2")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("eval", help="rank-k rates from a matrix and manifest group")
    s.add_argument("matrix")
    s.add_argument("--manifest", required=True)
    s.add_argument("--group", type=int, default=1)
    s.add_argument("--ranks", type=int, nargs="+", default=list(DEFAULT_RANKS))
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("experiment", help="run variants x features from a JSON config")
    s.add_argument("config")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("train-sr", help="train a desk-scale SR model on synthetic patches")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--arch", choices=("desk", "srcnn"), default="desk")
    s.add_argument("--pairs", type=int, default=200)
    s.add_argument("--patch", type=int, default=16)
    s.add_argument("--factor", type=int, default=3)
    s.add_argument("--epochs", type=int, default=20)
    s.add_argument("--rate", type=float, default=0.02)
    s.add_argument("--batch", type=int, default=1)
    s.add_argument("--held-out", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train_sr)

    s = sub.add_parser("synth", help="write a synthetic corpus, manifest and config")
    s.add_argument("out_dir")
    s.add_argument("--identities", type=int, default=6)
    s.add_argument("--groups", type=int, default=2)
    s.add_argument("--probes", type=int, default=2, help="probes per identity per group")
    s.add_argument("--frame", type=int, default=150)
    s.add_argument("--noise", type=float, default=0.02)
    s.add_argument("--shading", type=float, default=0.0, help="smooth per-photo lighting amplitude")
    s.add_argument("--kinship", type=float, default=0.0, help="blend of every identity toward one shared face")
    s.add_argument("--copies", action="store_true", help="probes are exact gallery copies")
    s.add_argument("--weights", help="SR weight file for the config (default: identity model)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", kernels.backend())
    try:
        return args.func(args) or 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
