"""Centerline recall and skeleton precision of the extractor over generator
seeds, for a few surround scales and threshold settings."""

import argparse
import itertools
import time

import numpy as np
from scipy import ndimage

from palmvein.pipeline import PipelineConfig, run_extract
from palmvein.synthetic import shadowed_palm


def score(palm, skeleton, tol=2.0):
    to_skel = ndimage.distance_transform_edt(~skeleton)
    to_truth = ndimage.distance_transform_edt(~palm.centerline)
    hits = int((to_skel[palm.centerline] <= tol).sum())
    precise = int((to_truth[skeleton] <= tol).sum())
    return hits, int(palm.centerline.sum()), precise, int(skeleton.sum())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--sigmas", default="10,25,50")
    ap.add_argument("--thresholds", default="otsu,fixed:0.25")
    args = ap.parse_args()

    palms = [shadowed_palm(seed=s) for s in range(args.seeds)]
    print("sigma  threshold     recall  precision  mean_ms")
    for sigma, thr in itertools.product(
            [float(s) for s in args.sigmas.split(",")], args.thresholds.split(",")):
        cfg = PipelineConfig(sigma=sigma, threshold=thr)
        totals = np.zeros(4, dtype=np.int64)
        t0 = time.perf_counter()
        for palm in palms:
            totals += score(palm, run_extract(palm.image, cfg).skeleton.mask)
        ms = (time.perf_counter() - t0) * 1000 / len(palms)
        recall = totals[0] / totals[1]
        precision = totals[2] / totals[3] if totals[3] else float("nan")
        print(f"{sigma:5g}  {thr:<12}  {recall:6.3f}  {precision:9.3f}  {ms:7.0f}")


if __name__ == "__main__":
    main()
