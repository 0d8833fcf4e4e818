"""Histogram equalization, median smoothing and the baseline enhancers
(CLAHE, DoG-HE, Gaussian low-pass) used for method comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import GrayImage, normalize_minmax
from .retinex import build_kernel, convolve_separable

LEVELS = 256

DEFAULT_MEDIAN_WINDOW = 3
DEFAULT_CLAHE_TILES = (8, 8)
DEFAULT_CLAHE_CLIP = 2.0
DEFAULT_DOG_SIGMA = 1.0
DEFAULT_DOG_RATIO = 4.0
DEFAULT_GLPF_SIGMA = 2.0


def quantize(data: np.ndarray) -> np.ndarray:
    """Gray level ``clamp(floor(v*255 + 0.5), 0, 255)`` as int64."""
    return np.clip(np.floor(np.asarray(data) * 255.0 + 0.5), 0, 255).astype(np.int64)


@dataclass(frozen=True)
class Histogram:
    bins: np.ndarray
    total: int

    @classmethod
    def of(cls, img: GrayImage) -> "Histogram":
        return cls.from_levels(quantize(img.data))

    @classmethod
    def from_levels(cls, levels: np.ndarray) -> "Histogram":
        bins = np.bincount(levels.ravel(), minlength=LEVELS)
        return cls(bins, int(levels.size))

    def probabilities(self) -> np.ndarray:
        return self.bins / self.total


def _equalization_map(bins: np.ndarray, occupied: np.ndarray) -> np.ndarray:
    """Level -> [0,1] via ``(cdf - cdf_min) / (total - cdf_min)``.

    ``cdf_min`` is taken at the lowest level occupied in ``occupied``.
    """
    cdf = np.cumsum(bins, dtype=np.float64)
    total = cdf[-1]
    nz = np.flatnonzero(occupied)
    if nz.size == 0:
        return np.zeros(LEVELS)
    cdf_min = cdf[nz[0]]
    if total <= cdf_min:
        return np.zeros(LEVELS)
    return np.clip((cdf - cdf_min) / (total - cdf_min), 0.0, 1.0)


def histogram_equalize(img: GrayImage) -> GrayImage:
    levels = quantize(img.data)
    hist = Histogram.from_levels(levels)
    lut = _equalization_map(hist.bins, hist.bins)
    return GrayImage(lut[levels])


def median_filter(img: GrayImage, window: int = DEFAULT_MEDIAN_WINDOW) -> GrayImage:
    """Window x window median with edge-replicated borders."""
    if isinstance(window, bool) or int(window) != window or window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be a positive odd integer, got {window}")
    window = int(window)
    if window == 1:
        return img
    r = window // 2
    padded = np.pad(img.data, r, mode="edge")
    view = sliding_window_view(padded, (window, window))
    flat = view.reshape(img.height, img.width, window * window)
    return GrayImage(np.median(flat, axis=-1))


def _tile_edges(n: int, tiles: int) -> np.ndarray:
    return np.linspace(0, n, tiles + 1).round().astype(int)


def clahe(img: GrayImage, tiles: tuple[int, int] = DEFAULT_CLAHE_TILES,
          clip_limit: float = DEFAULT_CLAHE_CLIP) -> GrayImage:
    """Contrast-limited adaptive histogram equalization.

    ``tiles`` is (rows, cols). ``clip_limit`` is a multiple of the uniform
    bin height ``tile_pixels / 256``; the clipped excess is spread evenly
    over all bins. Tile mappings are bilinearly interpolated between tile
    centres and clamped at the border.
    """
    ty, tx = (int(t) for t in tiles)
    if ty < 1 or tx < 1:
        raise ValueError(f"tile grid must be at least 1x1, got {tiles}")
    if not clip_limit > 0:
        raise ValueError(f"clip limit must be positive, got {clip_limit}")
    h, w = img.shape
    if ty > h or tx > w:
        raise ValueError(f"tile grid {ty}x{tx} exceeds image size {h}x{w}")

    levels = quantize(img.data)
    ye, xe = _tile_edges(h, ty), _tile_edges(w, tx)
    maps = np.empty((ty, tx, LEVELS))
    for i in range(ty):
        for j in range(tx):
            tile = levels[ye[i]:ye[i + 1], xe[j]:xe[j + 1]]
            bins = np.bincount(tile.ravel(), minlength=LEVELS).astype(np.float64)
            limit = clip_limit * tile.size / LEVELS
            clipped = np.minimum(bins, limit)
            excess = bins.sum() - clipped.sum()
            clipped += excess / LEVELS
            maps[i, j] = _equalization_map(clipped, bins)

    yc = (ye[:-1] + ye[1:] - 1) / 2.0
    xc = (xe[:-1] + xe[1:] - 1) / 2.0
    y0, wy = _interp_coords(np.arange(h), yc)
    x0, wx = _interp_coords(np.arange(w), xc)
    y1 = np.minimum(y0 + 1, ty - 1)
    x1 = np.minimum(x0 + 1, tx - 1)

    Y0, X0 = y0[:, None], x0[None, :]
    Y1, X1 = y1[:, None], x1[None, :]
    WY, WX = wy[:, None], wx[None, :]
    out = ((1 - WY) * ((1 - WX) * maps[Y0, X0, levels] + WX * maps[Y0, X1, levels])
           + WY * ((1 - WX) * maps[Y1, X0, levels] + WX * maps[Y1, X1, levels]))
    return GrayImage(np.clip(out, 0.0, 1.0))


def _interp_coords(pos: np.ndarray, centers: np.ndarray):
    """Lower tile index and fractional weight toward the next tile."""
    if len(centers) == 1:
        return np.zeros(len(pos), dtype=int), np.zeros(len(pos))
    idx = np.searchsorted(centers, pos, side="right") - 1
    idx = np.clip(idx, 0, len(centers) - 2)
    frac = (pos - centers[idx]) / (centers[idx + 1] - centers[idx])
    return idx, np.clip(frac, 0.0, 1.0)


def difference_of_gaussians(img: GrayImage, sigma_small: float = DEFAULT_DOG_SIGMA,
                            ratio: float = DEFAULT_DOG_RATIO) -> GrayImage:
    """Wide minus narrow blur (dark lines come out positive). Unscaled."""
    if not sigma_small > 0:
        raise ValueError(f"sigma_small must be positive, got {sigma_small}")
    if not ratio > 1:
        raise ValueError(f"kernel ratio must exceed 1, got {ratio}")
    narrow = convolve_separable(img, build_kernel(sigma_small)).data
    wide = convolve_separable(img, build_kernel(sigma_small * ratio)).data
    return GrayImage(wide - narrow)


def dog_he(img: GrayImage, sigma_small: float = DEFAULT_DOG_SIGMA,
           ratio: float = DEFAULT_DOG_RATIO) -> GrayImage:
    dog = difference_of_gaussians(img, sigma_small, ratio)
    return histogram_equalize(normalize_minmax(dog))


def gaussian_lowpass(img: GrayImage, sigma: float = DEFAULT_GLPF_SIGMA) -> GrayImage:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return normalize_minmax(convolve_separable(img, build_kernel(sigma)))
