"""Binarization, connected-component pruning, inversion and thinning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .enhance import LEVELS, Histogram, quantize
from .image import GrayImage

DEFAULT_MIN_AREA = 20000
REFERENCE_AREA = 360 * 657
DEFAULT_CONNECTIVITY = 8


@dataclass(frozen=True)
class BinaryImage:
    """Boolean raster, ``mask[row, col]``; True is foreground."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise ValueError(f"BinaryImage needs a 2-D mask, got shape {m.shape}")
        if m.dtype != bool:
            if not np.isin(m, (0, 1)).all():
                raise ValueError("BinaryImage values must be boolean")
            m = m.astype(bool)
        else:
            m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def shape(self):
        return self.mask.shape

    def count(self) -> int:
        return int(self.mask.sum())

    def to_gray(self) -> GrayImage:
        """{0, 1} rendering, for writing masks as {0, 255} images."""
        return GrayImage(self.mask.astype(np.float64))

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    __hash__ = None


@dataclass(frozen=True)
class ComponentLabeling:
    labels: np.ndarray
    component_sizes: dict[int, int]

    @property
    def count(self) -> int:
        return len(self.component_sizes)


# --------------------------------------------------------------------------
# Thresholding


def otsu_level(hist: Histogram) -> int | None:
    """Gray level k maximizing between-class variance for classes
    ``<= k`` / ``> k``; lowest k wins ties, None when no split separates.

    Scores are compared exactly: with n0 pixels and level sum s0 below the
    cut, the variance is proportional to ``(N*s0 - n0*S)**2 / (n0*n1)``.
    """
    bins = hist.bins.astype(np.int64)
    n0 = np.cumsum(bins)
    s0 = np.cumsum(bins * np.arange(LEVELS, dtype=np.int64))
    total, total_sum = int(n0[-1]), int(s0[-1])
    best, best_num, best_den = None, 0, 1
    for k in range(LEVELS):
        a, s = int(n0[k]), int(s0[k])
        b = total - a
        if a == 0 or b == 0:
            continue
        num = (total * s - a * total_sum) ** 2
        den = a * b
        if num * best_den > best_num * den:
            best, best_num, best_den = k, num, den
    return best


def threshold(img: GrayImage, method="otsu") -> BinaryImage:
    """Foreground = pixels darker than the threshold.

    ``method`` is ``"otsu"``, a float t in [0, 1], or ``"fixed:<t>"``.
    Otsu works on the 256-level histogram and keeps levels ``<= k``;
    a histogram that admits no split gives an all-background mask.
    """
    if isinstance(method, str) and method.startswith("fixed:"):
        method = float(method.split(":", 1)[1])
    if method == "otsu":
        levels = quantize(img.data)
        k = otsu_level(Histogram.from_levels(levels))
        if k is None:
            return BinaryImage(np.zeros(img.shape, dtype=bool))
        return BinaryImage(levels <= k)
    if isinstance(method, str):
        raise ValueError(f"unknown threshold method {method!r} (use otsu or fixed:<t>)")
    t = float(method)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"fixed threshold must lie in [0, 1], got {t}")
    return BinaryImage(img.data < t)


def otsu_threshold_value(img: GrayImage) -> float | None:
    """The Otsu cut expressed on the unit scale, ``(k + 0.5) / 255``."""
    k = otsu_level(Histogram.of(img))
    return None if k is None else (k + 0.5) / 255.0


# --------------------------------------------------------------------------
# Components


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def label_components(binary: BinaryImage,
                     connectivity: int = DEFAULT_CONNECTIVITY) -> ComponentLabeling:
    """Labels 1..K numbered by the raster position of each component's first pixel."""
    labels, count = ndimage.label(binary.mask, structure=_structure(connectivity))
    labels = labels.astype(np.int64)
    # ndimage numbers components in raster scan order already; enforce it
    # so the contract does not hinge on that implementation detail.
    if count:
        flat = labels.ravel()
        idx = np.flatnonzero(flat)
        _, first = np.unique(flat[idx], return_index=True)
        order = np.argsort(idx[first], kind="stable")
        remap = np.zeros(count + 1, dtype=np.int64)
        remap[order + 1] = np.arange(1, count + 1)
        labels = remap[labels]
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    return ComponentLabeling(labels, {i: int(sizes[i]) for i in range(1, count + 1)})


def scaled_min_area(min_area: int, height: int, width: int) -> int:
    """Scale an area threshold tuned for a 360x657 ROI to another image size."""
    return int(round(min_area * (height * width) / REFERENCE_AREA))


def remove_small_components(binary: BinaryImage, min_area: int,
                            connectivity: int = DEFAULT_CONNECTIVITY) -> BinaryImage:
    if min_area < 0:
        raise ValueError(f"min_area must be >= 0, got {min_area}")
    if min_area == 0:
        return binary
    lab = label_components(binary, connectivity)
    keep = np.zeros(lab.count + 1, dtype=bool)
    for label, size in lab.component_sizes.items():
        keep[label] = size >= min_area
    return BinaryImage(keep[lab.labels])


def invert(binary: BinaryImage) -> BinaryImage:
    return BinaryImage(~binary.mask)


# --------------------------------------------------------------------------
# Thinning


def _neighbours(m: np.ndarray):
    """P2..P9 (N, NE, E, SE, S, SW, W, NW) as uint8 planes, zero outside."""
    p = np.pad(m, 1).astype(np.uint8)
    h, w = m.shape
    c = lambda dy, dx: p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return [c(-1, 0), c(-1, 1), c(0, 1), c(1, 1), c(1, 0), c(1, -1), c(0, -1), c(-1, -1)]


def _removable(m: np.ndarray, first: bool) -> np.ndarray:
    n = _neighbours(m)
    p2, p3, p4, p5, p6, p7, p8, p9 = n
    b = sum(x.astype(np.int32) for x in n)
    seq = n + [p2]
    a = sum(((seq[i] == 0) & (seq[i + 1] == 1)).astype(np.int32) for i in range(8))
    if first:
        c1 = (p2 & p4 & p6) == 0
        c2 = (p4 & p6 & p8) == 0
    else:
        c1 = (p2 & p4 & p8) == 0
        c2 = (p2 & p6 & p8) == 0
    cand = m & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2
    # Two-pixel-thick diagonals and 2x2 blocks would be erased whole by a
    # parallel subpass; keep a pixel whose removal set would swallow a
    # complete 2x2 block it belongs to.
    return cand & ~_whole_block(m, cand)


def _whole_block(m: np.ndarray, cand: np.ndarray) -> np.ndarray:
    h, w = m.shape
    block = m[:-1, :-1] & m[:-1, 1:] & m[1:, :-1] & m[1:, 1:]
    gone = cand[:-1, :-1] & cand[:-1, 1:] & cand[1:, :-1] & cand[1:, 1:]
    hit = block & gone
    protect = np.zeros((h, w), dtype=bool)
    if hit.any():
        # keep the bottom-right pixel of each fully-removed block
        protect[1:, 1:] |= hit
    return protect


def thin(binary: BinaryImage) -> BinaryImage:
    """Zhang-Suen two-subpass thinning, iterated to a fixpoint."""
    m = binary.mask.copy()
    while True:
        changed = False
        for first in (True, False):
            rm = _removable(m, first)
            if rm.any():
                m &= ~rm
                changed = True
        if not changed:
            return BinaryImage(m)
