"""Gaussian surround and single-scale Retinex."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import GrayImage, normalize_minmax

DEFAULT_SIGMA = 25.0
DEFAULT_EPSILON = 1e-4


@dataclass(frozen=True)
class GaussianKernel:
    """Unit-sum 1-D Gaussian profile; the 2-D surround is its outer product."""

    sigma: float
    radius: int
    weights: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.radius + 1

    def dense(self) -> np.ndarray:
        return np.outer(self.weights, self.weights)


def build_kernel(sigma: float) -> GaussianKernel:
    """Truncate at ``ceil(3 sigma)`` and renormalize to unit sum.

    The analytic prefactor of the continuous Gaussian is dropped on purpose:
    only a unit-sum surround leaves a constant image unchanged.
    """
    if not sigma > 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    d = np.arange(1, radius + 1, dtype=np.float64)
    tail = np.exp(-(d * d) / (2.0 * sigma * sigma))
    w = np.concatenate([tail[::-1], [1.0], tail])
    w /= math.fsum(w)
    # mirror so symmetry is bit-exact after the division
    w[:radius] = w[radius + 1:][::-1]
    w.setflags(write=False)
    return GaussianKernel(float(sigma), radius, w)


def _convolve_axis(data: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    radius = (len(w) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(data, pad, mode="edge")
    n = data.shape[axis]

    def shifted(offset):
        s = radius + offset
        return padded[s:s + n, :] if axis == 0 else padded[:, s:s + n]

    # Accumulate deviations from the centre sample, tap pairs in ascending
    # distance: a locally constant signal then comes out bit-exact.
    out = np.zeros_like(data)
    twice = 2.0 * data
    buf = np.empty_like(data)
    for k in range(1, radius + 1):
        np.add(shifted(-k), shifted(k), out=buf)
        buf -= twice
        buf *= w[radius + k]
        out += buf
    out += data
    return out


def convolve_separable(img: GrayImage, k: GaussianKernel) -> GrayImage:
    """Horizontal then vertical pass with edge-replicated borders."""
    data = img.data
    tmp = _convolve_axis(data, k.weights, axis=1)
    out = _convolve_axis(tmp, k.weights, axis=0)
    # the result is a convex combination of inputs; clamp away last-ulp drift
    np.clip(out, data.min(), data.max(), out=out)
    return GrayImage(out)


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    return convolve_separable(img, build_kernel(sigma))


def single_scale_retinex(img: GrayImage, k: GaussianKernel,
                         epsilon: float = DEFAULT_EPSILON) -> GrayImage:
    """Log-domain reflectance ``log(I + eps) - log(G*I + eps)``.

    Returns a GrayImage of unbounded log values (the reflectance map).
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    data = img.data
    if data.min() < 0:
        raise ValueError("retinex input must be non-negative")
    surround = convolve_separable(img, k).data
    return GrayImage(np.log(data + epsilon) - np.log(surround + epsilon))


def rescale_to_unit(r: GrayImage) -> GrayImage:
    """Min-max a reflectance map into [0, 1]; constant maps become zeros."""
    return normalize_minmax(r)
