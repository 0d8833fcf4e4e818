"""Synthetic palm-like test images with known vein centerlines and shadow."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import GrayImage


@dataclass(frozen=True)
class SyntheticPalm:
    image: GrayImage          # observed intensity I = R * L + noise
    reflectance: np.ndarray   # R
    illumination: np.ndarray  # L
    centerline: np.ndarray    # bool, 1-px vein centerlines
    veins: np.ndarray         # bool, full vein width
    shadow: np.ndarray        # bool, strongly shadowed region


def _draw_segment(mask, p0, p1):
    n = int(np.ceil(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1])))) + 1
    ys = np.rint(np.linspace(p0[0], p1[0], n)).astype(int)
    xs = np.rint(np.linspace(p0[1], p1[1], n)).astype(int)
    ok = (ys >= 0) & (ys < mask.shape[0]) & (xs >= 0) & (xs < mask.shape[1])
    mask[ys[ok], xs[ok]] = True


def _grow(mask, rng, start, angle, length, depth, branch_prob, step=6.0):
    h, w = mask.shape
    y, x = start
    heading = angle
    travelled = 0.0
    while travelled < length:
        # wander, with a pull back toward the initial heading
        angle += rng.normal(0.0, 0.12) + 0.15 * (heading - angle)
        ny, nx = y + step * np.sin(angle), x + step * np.cos(angle)
        if not (2 <= ny < h - 2 and 2 <= nx < w - 2):
            break
        _draw_segment(mask, (y, x), (ny, nx))
        y, x = ny, nx
        travelled += step
        if depth > 0 and rng.random() < branch_prob:
            side = rng.choice((-1.0, 1.0))
            _grow(mask, rng, (y, x), angle + side * rng.uniform(0.5, 1.1),
                  length * rng.uniform(0.3, 0.6), depth - 1, branch_prob, step)


def vein_tree(height: int, width: int, seed: int = 0, trunks: int = 2,
              branch_prob: float = 0.04) -> np.ndarray:
    """Connected branching centerlines, one tree per trunk joined at the base."""
    rng = np.random.default_rng(seed)
    mask = np.zeros((height, width), dtype=bool)
    for t in range(trunks):
        offset = (t - (trunks - 1) / 2.0) / max(trunks, 1)
        base = (height - 3.0, width * (0.5 + 0.6 * offset))
        _grow(mask, rng, base, -np.pi / 2 + 0.3 * offset, height * 0.95, 2, branch_prob)
    # bottom bar joins the trunks into a single network
    _draw_segment(mask, (height - 3, width * 0.2), (height - 3, width * 0.8))
    return mask


def shadowed_palm(height: int = 657, width: int = 360, seed: int = 0,
                  vein_halfwidth: float = 2.5, vein_depth: float = 0.45,
                  shadow_strength: float = 0.8, noise: float = 0.004,
                  shadow_scale: float = 1.0, trunks: int = 2,
                  branch_prob: float = 0.04) -> SyntheticPalm:
    """A vein tree under side lighting plus a deep central shadow.

    Reflectance drops by up to ``vein_depth`` across each vein with a
    Gaussian cross-section; illumination is a smooth lateral gradient
    times a wide Gaussian shadow that removes ``shadow_strength`` of the
    light at its core.
    """
    rng = np.random.default_rng(seed + 1)
    centerline = vein_tree(height, width, seed, trunks, branch_prob)
    dist = ndimage.distance_transform_edt(~centerline)
    reflectance = 1.0 - vein_depth * np.exp(-(dist ** 2) / (2 * vein_halfwidth ** 2))
    veins = dist <= vein_halfwidth

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    lateral = 0.55 + 0.4 * xx / max(width - 1, 1)
    cy, cx = height * 0.5, width * 0.45
    sy, sx = height * 0.27 * shadow_scale, width * 0.3 * shadow_scale
    blob = np.exp(-(((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2) / 2)
    illumination = lateral * (1.0 - shadow_strength * blob)
    shadow = blob > 0.6

    observed = reflectance * illumination + rng.normal(0.0, noise, (height, width))
    observed = np.clip(observed, 0.0, 1.0)
    return SyntheticPalm(GrayImage(observed), reflectance, illumination,
                         centerline, veins, shadow)


def stripes(height: int = 96, width: int = 96, period: int = 8, low: float = 0.3,
            seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Binary vertical stripe reflectance and a smooth wide illumination field."""
    xx = np.arange(width)
    r = np.where((xx // (period // 2)) % 2 == 0, 1.0, low)
    reflectance = np.tile(r, (height, 1))
    yy, xg = np.mgrid[0:height, 0:width].astype(np.float64)
    cy, cx = height * 0.3, width * 0.6
    if seed is not None:
        rng = np.random.default_rng(seed)
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
    illumination = 0.15 + 0.85 * np.exp(
        -((yy - cy) ** 2 + (xg - cx) ** 2) / (2 * (0.6 * max(height, width)) ** 2)
    )
    return reflectance, illumination
