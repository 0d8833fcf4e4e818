"""Score the original and the four enhancers in one quality table, on an
image file or on a synthetic shadowed palm."""

import argparse

from palmvein.image import load_image
from palmvein.pipeline import run_compare
from palmvein.synthetic import shadowed_palm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", help="PGM/PNG image; a synthetic palm when omitted")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print JSON instead of Markdown")
    args = ap.parse_args()

    img = load_image(args.input) if args.input else shadowed_palm(seed=args.seed).image
    report = run_compare(img)
    print(report.to_json() if args.json else report.to_markdown())


if __name__ == "__main__":
    main()
