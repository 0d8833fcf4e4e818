"""Command-line interface: extract, compare, cube-average, metrics."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import metrics
from .image import ImageFormatError, ManifestError, load_image
from .pipeline import (METHOD_NAMES, PipelineConfig, StageError, UnknownMethodError,
                       parse_field, run_compare, run_cube_average, run_extract)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PROCESSING = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag dest -> config field; flags default to None so that
# precedence is flag > config file > built-in default
_CONFIG_FLAGS = {
    "sigma": "sigma",
    "epsilon": "epsilon",
    "median": "median_window",
    "threshold": "threshold",
    "min_area": "min_area",
    "connectivity": "connectivity",
    "roi": "roi",
    "center": "band_center_nm",
    "width": "band_width_nm",
    "clahe_tiles": "clahe_tiles",
    "clahe_clip": "clahe_clip",
    "dog_sigma": "dog_sigma",
    "dog_ratio": "dog_ratio",
    "glpf_sigma": "glpf_sigma",
}


def _add_config_flags(p, extract: bool):
    p.add_argument("--config", help="key=value config file (flags override it)")
    p.add_argument("--sigma", help="Retinex surround scale in pixels (default 25)")
    p.add_argument("--epsilon", help="log guard added inside both logarithms (default 1e-4)")
    p.add_argument("--roi", help="crop x,y,w,h applied after normalization")
    if extract:
        p.add_argument("--median", help="median window, odd (default 3)")
        p.add_argument("--threshold", help="otsu or fixed:<t> (default otsu)")
        p.add_argument("--min-area", help="prune components smaller than this (default 20000)")
        p.add_argument("--no-area-scale", action="store_true",
                       help="use --min-area as is instead of scaling it to the image area")
        p.add_argument("--connectivity", help="4 or 8 (default 8)")
        p.add_argument("--invert-before-prune", action="store_true",
                       help="prune the inverted mask (fills small holes) instead of the veins")
        p.add_argument("--center", help="band centre in nm for --cube input (default 850)")
        p.add_argument("--width", help="band width in nm for --cube input (default 10)")
    else:
        p.add_argument("--clahe-tiles", help="CLAHE tile grid rows,cols (default 8,8)")
        p.add_argument("--clahe-clip", help="CLAHE clip limit (default 2.0)")
        p.add_argument("--dog-sigma", help="narrow DoG sigma (default 1)")
        p.add_argument("--dog-ratio", help="wide/narrow DoG sigma ratio (default 4)")
        p.add_argument("--glpf-sigma", help="Gaussian low-pass sigma (default 2)")


def build_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = PipelineConfig.loads(Path(args.config).read_text(encoding="utf-8"), base=cfg)
    changes = {}
    for dest, fld in _CONFIG_FLAGS.items():
        raw = getattr(args, dest, None)
        if raw is not None:
            try:
                changes[fld] = parse_field(fld, str(raw))
            except ValueError as exc:
                raise UsageError(f"--{dest.replace('_', '-')}: {exc}") from None
    if getattr(args, "no_area_scale", False):
        changes["area_scale"] = False
    if getattr(args, "invert_before_prune", False):
        changes["invert_before_prune"] = True
    try:
        return cfg.replace(**changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="palmvein", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="run the vein extraction pipeline")
    p.add_argument("--input", required=True, help="PGM/PNG image, or manifest with --cube")
    p.add_argument("--cube", action="store_true", help="input is a cube manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace", action="store_true", help="write every stage output")
    _add_config_flags(p, extract=True)

    p = sub.add_parser("compare", help="score enhancement methods side by side")
    p.add_argument("--input", required=True)
    p.add_argument("--methods", default=",".join(METHOD_NAMES),
                   help=f"comma-separated subset of {','.join(METHOD_NAMES)}")
    p.add_argument("--report", help="output path, .json or .md (default: markdown to stdout)")
    p.add_argument("--entropy-base", choices=("e", "2"), default="e",
                   help="log base for entropy: e (nats) or 2 (bits)")
    _add_config_flags(p, extract=False)

    p = sub.add_parser("cube-average", help="average cube bands around a centre wavelength")
    p.add_argument("--manifest", required=True)
    p.add_argument("--center", type=float, default=850.0)
    p.add_argument("--width", type=float, default=10.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="contrast, entropy and definition of one image")
    p.add_argument("--input", required=True)
    p.add_argument("--entropy-base", choices=("e", "2"), default="e")
    return parser


def _entropy_base(text: str) -> float:
    return math.e if text == "e" else 2.0


def cmd_extract(args) -> int:
    cfg = build_config(args)
    out_dir = Path(args.out_dir)
    result = run_extract(args.input, cfg, out_dir=out_dir, trace=args.trace, cube=args.cube)
    (out_dir / "config.txt").write_text(cfg.dumps(), encoding="utf-8")
    if args.trace:
        lines = [f"{name}\t{path}\t{ms:.1f}"
                 for (name, path), ms in zip(result.trace.stages, result.trace.timings_ms)]
        (out_dir / "trace.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"skeleton: {out_dir / 'skeleton.pgm'} ({result.skeleton.count()} px, "
          f"min_area {result.min_area})")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = build_config(args)
    try:
        report = run_compare(args.input, args.methods, cfg, _entropy_base(args.entropy_base))
    except UnknownMethodError as exc:
        raise UsageError(str(exc)) from None
    if args.report is None:
        sys.stdout.write(report.to_markdown())
        return EXIT_OK
    path = Path(args.report)
    if path.suffix.lower() == ".json":
        path.write_text(report.to_json() + "\n", encoding="utf-8")
    elif path.suffix.lower() == ".md":
        path.write_text(report.to_markdown(), encoding="utf-8")
    else:
        raise UsageError(f"--report must end in .json or .md, got {path.name}")
    return EXIT_OK


def cmd_cube_average(args) -> int:
    try:
        run_cube_average(args.manifest, args.center, args.width, args.out)
    except ValueError as exc:
        if isinstance(exc, ManifestError):
            raise
        raise StageError("average", exc) from exc
    return EXIT_OK


def cmd_metrics(args) -> int:
    img = load_image(args.input)
    base = _entropy_base(args.entropy_base)
    out = {
        "contrast": round(metrics.contrast(img), 4),
        "entropy": round(metrics.entropy(img, base), 4),
        "definition": round(metrics.definition(img), 4),
    }
    print(json.dumps(out))
    return EXIT_OK


COMMANDS = {
    "extract": cmd_extract,
    "compare": cmd_compare,
    "cube-average": cmd_cube_average,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"palmvein: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ImageFormatError, ManifestError) as exc:
        print(f"palmvein: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StageError as exc:
        if isinstance(exc.cause, (OSError, ImageFormatError, ManifestError)):
            print(f"palmvein: input error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"palmvein: processing error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    except ValueError as exc:
        print(f"palmvein: processing error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
