"""``eigensr`` command-line entry point.

Exit codes: 0 success, 1 partial failure (some inputs skipped), 2 invalid arguments.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .dictionary import build_dictionary, load_dictionary, save_dictionary
from .eigenpatch import DEFAULT_MAX_ITER, DEFAULT_TAU, DEFAULT_TOL
from .errors import FormatError
from .imgcore import as_fraction, load_image, save_image, target_size
from .iriseval import (LogGaborComparator, compute_eer, normalize_polar, read_annotations,
                       run_identification, run_verification, write_annotations)
from .pipeline import (BENCH_HEADER, bench_row, degrade, factor_of, list_images, load_labeled_set,
                       make_samples, reconstruct_set, super_resolve)
from .quality import format_psnr, psnr, ssim
from .synth import generate_corpus

log = logging.getLogger("eigensr")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(value) -> str:
    return format_psnr(value) if isinstance(value, float) else str(value)


def _write_manifest(path: Path, args, **extra) -> None:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
             if k != "func"}
    manifest = {"tool": "eigensr", "version": __version__, "flags": flags, **extra}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _factor(text):
    try:
        f = factor_of(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad factor {text!r} (use n or 1/n)") from None
    if f.numerator != 1 or f.denominator < 1:
        raise argparse.ArgumentTypeError(f"factor must be 1/n for an integer n, got {text}")
    return f


def _fraction(text):
    try:
        f = as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad fraction {text!r}") from None
    if not 0 < f <= 1:
        raise argparse.ArgumentTypeError(f"fraction must be in (0, 1], got {text}")
    return f


def _unit_interval(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1], got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
    return value


# ----------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    if args.side % 2 == 0 or args.side < 63:
        raise UsageError(f"--side must be odd and >= 63, got {args.side}")
    args.out.mkdir(parents=True, exist_ok=True)
    anns = []
    count = 0
    for image_id, img, ann in generate_corpus(args.count, args.side, args.seed, args.samples):
        save_image(img, args.out / f"{image_id}.pgm")
        anns.append(ann)
        count += 1
    write_annotations(args.out / "annotations.csv", anns)
    _write_manifest(args.out / "manifest.json", args, files=count)
    print(count)
    return EXIT_OK


def _load_all(paths):
    images, failed = [], []
    for p in paths:
        try:
            images.append((p, load_image(p)))
        except (OSError, FormatError) as exc:
            log.error("skipping %s: %s", p.name, exc)
            failed.append(p)
    return images, failed


def _common_side(images) -> int:
    sizes = {(img.width, img.height) for _, img in images}
    if len(sizes) > 1 or any(w != h for w, h in sizes):
        report = ", ".join(f"{p.name}={img.width}x{img.height}" for p, img in images)
        raise UsageError(f"images must share one square size; found {sorted(sizes)}: {report}")
    return next(iter(sizes))[0]


def cmd_degrade(args) -> int:
    images, failed = _load_all(list_images(args.in_dir))
    if not images and not failed:
        log.warning("no images found in %s", args.in_dir)
    if images:
        side = _common_side(images)
        lr = target_size(side, args.factor)
        log.info("degrading %d images %dpx -> %dpx", len(images), side, lr)
    args.out.mkdir(parents=True, exist_ok=True)
    n = args.factor.denominator
    for path, img in images:
        save_image(degrade(img, args.factor), args.out / f"{path.stem}_lr{n}.pgm")
    _write_manifest(args.out / "manifest.json", args, files=len(images),
                    skipped=[p.name for p in failed])
    print(len(images))
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_dict_build(args) -> int:
    images, failed = _load_all(list_images(args.train))
    if len(images) < 2:
        raise UsageError(f"need at least 2 readable training images in {args.train}")
    _common_side(images)
    dictionary = build_dictionary([img for _, img in images], args.factor, args.patch,
                                  args.overlap, args.retention)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_dictionary(dictionary, args.out)
    print(f"{dictionary.n_train} images, {dictionary.n_positions} positions, "
          f"HR {dictionary.hr_side} / LR {dictionary.lr_side}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_sr_pca(args) -> int:
    dictionary = load_dictionary(args.dict)
    lr = load_image(args.in_path)
    out = super_resolve(lr, "pca", dictionary.hr_side, dictionary, not args.no_reproject,
                        args.tau, args.tol, args.max_iter)
    save_image(out, args.out)
    return EXIT_OK


def cmd_sr_interp(args) -> int:
    lr = load_image(args.in_path)
    if lr.width != lr.height:
        raise UsageError("input must be square")
    hr_side = args.hr_side or lr.width * args.factor.denominator
    save_image(super_resolve(lr, args.method, hr_side), args.out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    ref, test = load_image(args.ref), load_image(args.test)
    if args.polar is not None:
        anns = read_annotations(args.polar)
        key = args.id or args.ref.stem
        if key not in anns:
            if len(anns) != 1:
                raise UsageError(f"no annotation for {key!r} in {args.polar}")
            key = next(iter(anns))
        ref, test = normalize_polar(ref, anns[key]), normalize_polar(test, anns[key])
    print(f"{format_psnr(psnr(ref, test))},{ssim(ref, test)!r}")
    return EXIT_OK


def _eval_inputs(args):
    anns = read_annotations(args.ann)
    items = load_labeled_set(args.images, anns)
    if not items:
        raise UsageError(f"no annotated images in {args.images}")
    dictionary = None
    factor = args.factor
    if args.method == "pca":
        if args.dict is None:
            raise UsageError("--method pca requires --dict")
        dictionary = load_dictionary(args.dict)
        if factor is None:
            factor = dictionary.scale_factor
        elif factor != dictionary.scale_factor:
            raise UsageError(f"--factor {factor} disagrees with dictionary factor {dictionary.scale_factor}")
    if factor is None:
        raise UsageError("--factor is required for interpolation methods")
    srs = reconstruct_set(items, args.method, factor, dictionary)
    return make_samples(items, srs), factor


def cmd_eval_verify(args) -> int:
    samples, factor = _eval_inputs(args)
    scores = run_verification(samples, LogGaborComparator(), args.scenario)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "scores.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "score"])
        for label, s in scores.rows():
            w.writerow([label, repr(s)])
    summary = {"genuine": int(scores.genuine.size), "impostor": int(scores.impostor.size),
               "method": args.method, "factor": str(factor), "scenario": args.scenario}
    if scores.genuine.size and scores.impostor.size:
        res = compute_eer(scores)
        with open(args.out / "det.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "far", "frr"])
            for t, (far, frr) in zip(res.thresholds, res.det_points):
                w.writerow([repr(t), repr(far), repr(frr)])
        summary.update(eer=res.eer, threshold=res.threshold)
        print(f"EER {res.eer:.4f} ({scores.genuine.size} genuine, {scores.impostor.size} impostor)")
    else:
        log.error("EER undefined: genuine=%d impostor=%d", scores.genuine.size, scores.impostor.size)
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_manifest(args.out / "manifest.json", args)
    return EXIT_OK if "eer" in summary else EXIT_PARTIAL


def cmd_eval_identify(args) -> int:
    samples, factor = _eval_inputs(args)
    res = run_identification(samples, LogGaborComparator(), args.scenario)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "cmc.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "accuracy"])
        for k, acc in enumerate(res.cmc, start=1):
            w.writerow([k, repr(acc)])
    summary = {"top1": res.top_k[1], "users": res.n_users, "probes": res.n_probes,
               "ties": res.ties, "method": args.method, "factor": str(factor),
               "scenario": args.scenario}
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_manifest(args.out / "manifest.json", args)
    print(f"Top-1 {res.top_k[1]:.4f} ({res.n_probes} probes, {res.n_users} users)")
    return EXIT_OK


def cmd_bench(args) -> int:
    anns = read_annotations(args.ann)
    items = load_labeled_set(args.images, anns)
    if not items:
        raise UsageError(f"no annotated images in {args.images}")
    dictionaries = [load_dictionary(p) for p in args.dict or []]
    methods = args.methods or (["bilinear", "bicubic"] + (["pca"] if dictionaries else []))
    if "pca" in methods and not dictionaries:
        raise UsageError("method pca requires at least one --dict")
    factors = list(args.factor or [])
    for d in dictionaries:
        if d.scale_factor not in factors:
            factors.append(d.scale_factor)
    if not factors:
        raise UsageError("give --factor or --dict")
    rows = []
    for factor in factors:
        for method in methods:
            if method == "pca":
                for d in (d for d in dictionaries if d.scale_factor == factor):
                    srs = reconstruct_set(items, "pca", factor, d)
                    rows.append(bench_row(items, srs, "pca", factor, d.patch_fraction))
            else:
                srs = reconstruct_set(items, method, factor)
                rows.append(bench_row(items, srs, method, factor))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        for row in rows:
            w.writerow([_fmt(row[k]) if k.startswith(("psnr", "ssim")) else row[k] for k in BENCH_HEADER])
    _write_manifest(args.out.with_suffix(".manifest.json"), args)
    for row in rows:
        print(",".join(_fmt(row[k]) for k in BENCH_HEADER))
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eigensr", description="Eigen-patch iris super-resolution toolkit")
    p.add_argument("--version", action="version", version=f"eigensr {__version__}")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a seeded synthetic iris corpus")
    s.add_argument("--count", type=_positive_int, required=True, help="number of identities")
    s.add_argument("--samples", type=_positive_int, default=3, help="images per identity (>= 2)")
    s.add_argument("--side", type=_positive_int, default=231, help="image side in pixels (odd, >= 63)")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", type=Path, required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("degrade", help="downsample a directory of square images by 1/n")
    s.add_argument("--in", dest="in_dir", type=Path, required=True, help="input directory")
    s.add_argument("--factor", type=_factor, required=True, help="n or 1/n")
    s.add_argument("--out", type=Path, required=True, help="output directory")
    s.set_defaults(func=cmd_degrade)

    d = sub.add_parser("dict", help="coupled dictionary operations")
    dsub = d.add_subparsers(dest="dict_command", required=True)
    s = dsub.add_parser("build", help="build a coupled LR/HR position-patch dictionary")
    s.add_argument("--train", type=Path, required=True, help="directory of aligned HR images")
    s.add_argument("--factor", type=_factor, required=True, help="downsampling factor n or 1/n")
    s.add_argument("--patch", type=_fraction, default=as_fraction("1/4"),
                   help="patch side as a fraction of the image side (default 1/4)")
    s.add_argument("--overlap", type=_fraction, default=as_fraction("1/3"),
                   help="patch overlap as a fraction of the patch side (default 1/3)")
    s.add_argument("--retention", type=_unit_interval, default=0.99,
                   help="fraction of variance kept by the eigen-patches (default 0.99)")
    s.add_argument("--out", type=Path, required=True, help="dictionary file (.json manifest written alongside)")
    s.set_defaults(func=cmd_dict_build)

    sr = sub.add_parser("sr", help="super-resolve one image")
    srsub = sr.add_subparsers(dest="sr_command", required=True)
    s = srsub.add_parser("pca", help="eigen-patch hallucination")
    s.add_argument("--dict", type=Path, required=True)
    s.add_argument("--in", dest="in_path", type=Path, required=True, help="LR image")
    s.add_argument("--out", type=Path, required=True, help="HR output (.pgm or .png)")
    s.add_argument("--no-reproject", action="store_true", help="skip the back-projection step")
    s.add_argument("--tau", type=_positive_float, default=DEFAULT_TAU, help="reprojection step size")
    s.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL,
                   help="stop when the mean absolute update (intensity units) is below this")
    s.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    s.set_defaults(func=cmd_sr_pca)
    s = srsub.add_parser("interp", help="bilinear or bicubic upsampling")
    s.add_argument("--method", choices=["bilinear", "bicubic"], required=True)
    s.add_argument("--factor", type=_factor, required=True, help="upsampling factor n or 1/n")
    s.add_argument("--hr-side", type=_positive_int, help="output side in pixels (default n * input side)")
    s.add_argument("--in", dest="in_path", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_sr_interp)

    s = sub.add_parser("metrics", help="PSNR (dB) and SSIM between two images")
    s.add_argument("--ref", type=Path, required=True)
    s.add_argument("--test", type=Path, required=True)
    s.add_argument("--polar", type=Path, help="annotation CSV: compare 20x240 polar versions instead")
    s.add_argument("--id", help="annotation row to use (default: reference file stem)")
    s.set_defaults(func=cmd_metrics)

    e = sub.add_parser("eval", help="biometric verification / identification")
    esub = e.add_subparsers(dest="eval_command", required=True)
    for name, func in (("verify", cmd_eval_verify), ("identify", cmd_eval_identify)):
        s = esub.add_parser(name)
        s.add_argument("--images", type=Path, required=True, help="directory of HR test images <user>_<index>")
        s.add_argument("--ann", type=Path, required=True, help="annotation CSV")
        s.add_argument("--dict", type=Path, help="dictionary (required for --method pca)")
        s.add_argument("--scenario", type=int, choices=[1, 2], default=2,
                       help="1: HR enrolment vs SR query; 2: SR vs SR")
        s.add_argument("--method", choices=["pca", "bicubic", "bilinear"], required=True)
        s.add_argument("--factor", type=_factor, help="downsampling factor n or 1/n")
        s.add_argument("--out", type=Path, required=True, help="output directory")
        s.set_defaults(func=func)

    s = sub.add_parser("bench", help="PSNR/SSIM table over methods and factors")
    s.add_argument("--images", type=Path, required=True, help="directory of HR test images")
    s.add_argument("--ann", type=Path, required=True, help="annotation CSV")
    s.add_argument("--dict", type=Path, action="append", help="dictionary file (repeatable)")
    s.add_argument("--factor", type=_factor, action="append", help="factor n or 1/n (repeatable)")
    s.add_argument("--methods", nargs="+", choices=["bilinear", "bicubic", "pca"])
    s.add_argument("--out", type=Path, required=True, help="results CSV")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"eigensr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"eigensr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
