"""``usconf`` command line: pipeline stages chained through files.

Exit codes: 0 success, 1 usage or validation error, 2 I/O error,
3 when ``eval`` finds a failing predicate.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .bench import bench_image, time_stages
from .compounding import fuse
from .config import ConfidenceConfig, ConfigError, load_config
from .evaluation import (
    DEFAULT_CLOSENESS,
    DEFAULT_MARGIN,
    PatchError,
    check_orderings,
    read_patches,
    write_patches,
)
from .grid import CONFIDENCE, INTENSITY, PROBABILITY, GridError, ProbMask
from .io import IMAGE_FORMATS, ImageFormatError, format_from_suffix, load_image, load_map, save_map
from .phantom import PhantomSpecError, generate, load_spec
from .pipeline import intensity_confidence, prepare, reference, structural_confidence
from .structural import load_reference, mean_frame, save_reference

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_EVAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def read_grid(path, domain=INTENSITY):
    """Images are normalised by their maximum code value; maps are read as stored."""
    if format_from_suffix(path) in IMAGE_FORMATS:
        return load_image(path).with_domain(domain)
    return load_map(path, domain)


def _config(args) -> ConfidenceConfig:
    return load_config(args.config) if args.config else ConfidenceConfig()


def _mask(args, shape):
    if not (args.mask_needle or args.mask_reverb):
        return None
    needle = read_grid(args.mask_needle, PROBABILITY).data if args.mask_needle else None
    reverb = read_grid(args.mask_reverb, PROBABILITY).data if args.mask_reverb else None
    if needle is None:
        needle = 0.0 * reverb
    if reverb is None:
        reverb = 0.0 * needle
    mask = ProbMask(needle, reverb)
    mask.check_shape(shape)
    return mask


def _figure(path, panels):
    from .plotting import plot_maps

    plot_maps(panels, path)


def cmd_denoise(args):
    cfg = _config(args)
    image = read_grid(args.input)
    save_map(prepare(image, cfg), args.output)


def cmd_confidence(args):
    cfg = _config(args)
    image = read_grid(args.input)
    conf = intensity_confidence(image, cfg, _mask(args, image.shape), not args.no_denoise)
    save_map(conf, args.output)
    if args.figure:
        _figure(args.figure, [("input", image), ("intensity confidence", conf)])


def cmd_structural(args):
    cfg = _config(args)
    image = read_grid(args.input)
    ref = load_reference(args.reference)
    conf = structural_confidence(image, ref, cfg, _mask(args, image.shape), not args.no_denoise)
    save_map(conf, args.output)
    if args.figure:
        _figure(args.figure, [("input", image), ("reference", ref.map),
                              ("structural confidence", conf)])


def cmd_build_ref(args):
    cfg = _config(args)
    frames = [read_grid(p) for p in args.phantoms]
    save_reference(reference(mean_frame(frames), cfg, not args.no_denoise), args.output)


def cmd_compound(args):
    img_a, img_b = read_grid(args.image_a), read_grid(args.image_b)
    conf_a, conf_b = read_grid(args.conf_a, CONFIDENCE), read_grid(args.conf_b, CONFIDENCE)
    save_map(fuse(img_a, conf_a, img_b, conf_b), args.output)


def cmd_phantom(args):
    spec = load_spec(args.spec)
    if args.empty:
        spec = spec.empty()
    image, mask, patches = generate(spec)
    out = Path(args.output)
    save_map(image, out)
    if args.out_masks:
        suffix = out.suffix or ".png"
        save_map(mask.needle, f"{args.out_masks}needle{suffix}")
        save_map(mask.reverb, f"{args.out_masks}reverb{suffix}")
    if args.out_patches:
        write_patches(patches, args.out_patches)


def cmd_eval(args):
    intensity = read_grid(args.intensity, CONFIDENCE)
    structural = read_grid(args.structural, CONFIDENCE)
    patches = read_patches(args.patches)
    report = check_orderings(intensity, structural, patches, args.margin, args.closeness)
    report.write_csv(args.report)
    if args.figure:
        from .plotting import plot_patch_boxes

        plot_patch_boxes(intensity, structural, patches, args.figure)
    for r in report.failures():
        print(f"FAIL triple {r.triple} {r.kind} {r.predicate}: "
              f"A={r.a:.4f} C={r.c:.4f} B={r.b:.4f}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_EVAL


def cmd_bench(args):
    if args.size < 2:
        raise UsageError(f"bench: size must be >= 2, got {args.size}")
    if args.iters < 1:
        raise UsageError(f"bench: --iters must be >= 1, got {args.iters}")
    cfg = _config(args)
    timings = time_stages(bench_image(args.size), cfg, args.iters, args.denoise)
    print("stage,size,seconds")
    for stage, seconds in timings.items():
        print(f"{stage},{args.size},{seconds:.6f}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="usconf", description="Ultrasound intensity and structural confidence maps.")
    p.add_argument("--version", action="version", version=f"usconf {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def stage(name, func, help, masks=False, denoise_flag=True, figure=True):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        sp.add_argument("--config", metavar="FILE", help="key = value parameter file")
        if denoise_flag:
            sp.add_argument("--no-denoise", action="store_true",
                            help="use the input as is instead of despeckling it first")
        if masks:
            sp.add_argument("--mask-needle", metavar="FILE", help="needle probability map")
            sp.add_argument("--mask-reverb", metavar="FILE", help="reverberation probability map")
        if figure:
            sp.add_argument("--figure", metavar="PNG", help="also render a figure")
        return sp

    sp = stage("denoise", cmd_denoise, "speckle-reducing diffusion", denoise_flag=False, figure=False)
    sp.add_argument("input")
    sp.add_argument("output")

    sp = stage("confidence", cmd_confidence, "intensity confidence map", masks=True)
    sp.add_argument("input")
    sp.add_argument("output")

    sp = stage("structural", cmd_structural, "structural confidence against a reference", masks=True)
    sp.add_argument("input")
    sp.add_argument("reference", help="file written by build-ref")
    sp.add_argument("output")

    sp = stage("build-ref", cmd_build_ref, "reference map from structure-free phantom frames",
               figure=False)
    sp.add_argument("phantoms", nargs="+", help="one or more frames, averaged before use")
    sp.add_argument("output")

    sp = sub.add_parser("compound", help="confidence-weighted fusion of two views")
    sp.set_defaults(func=cmd_compound)
    for name in ("image_a", "conf_a", "image_b", "conf_b", "output"):
        sp.add_argument(name)

    sp = sub.add_parser("phantom", help="render a synthetic phantom from a spec file")
    sp.set_defaults(func=cmd_phantom)
    sp.add_argument("spec", help="spec file or bundled name (shadow-demo, reverb-demo)")
    sp.add_argument("output")
    sp.add_argument("--out-masks", metavar="PREFIX",
                    help="write PREFIXneedle and PREFIXreverb probability maps")
    sp.add_argument("--out-patches", metavar="CSV", help="write the evaluation patches")
    sp.add_argument("--empty", action="store_true",
                    help="render the structure-free medium on an independent seed")

    sp = sub.add_parser("eval", help="check patch ordering predicates")
    sp.set_defaults(func=cmd_eval)
    for name in ("intensity", "structural", "patches", "report"):
        sp.add_argument(name)
    sp.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    sp.add_argument("--closeness", type=float, default=DEFAULT_CLOSENESS)
    sp.add_argument("--figure", metavar="PNG", help="box plots of the patch samples")

    sp = sub.add_parser("bench", help="time the intensity confidence stages")
    sp.set_defaults(func=cmd_bench)
    sp.add_argument("size", type=int)
    sp.add_argument("--iters", type=int, default=5)
    sp.add_argument("--denoise", action="store_true", help="include the denoiser")
    sp.add_argument("--config", metavar="FILE")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args) or EXIT_OK
    except (UsageError, ConfigError, GridError, PatchError, PhantomSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ImageFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
