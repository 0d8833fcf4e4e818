"""Grayscale rasters, spectral cubes and their file formats.

Pixel values live in [0, 1] as float64 everywhere inside the library;
quantization to 8 bits happens only when writing files and inside the
histogram-based operations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    """Raised for unreadable, malformed or unsupported image files."""


class ManifestError(ValueError):
    """Raised for malformed cube manifests."""


@dataclass(frozen=True)
class GrayImage:
    """2-D real-valued intensity raster, indexed ``data[row, col]``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"GrayImage needs a 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"GrayImage dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("GrayImage values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class Roi:
    x0: int
    y0: int
    width: int
    height: int

    @classmethod
    def parse(cls, text: str) -> "Roi":
        """Parse ``"x,y,w,h"``."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ValueError(f"ROI must be x,y,w,h; got {text!r}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError:
            raise ValueError(f"ROI entries must be integers; got {text!r}") from None

    @classmethod
    def centered(cls, img_width: int, img_height: int, width: int, height: int) -> "Roi":
        return cls((img_width - width) // 2, (img_height - height) // 2, width, height)

    def __str__(self):
        return f"{self.x0},{self.y0},{self.width},{self.height}"


@dataclass(frozen=True)
class SpectralCube:
    """Co-registered band images ordered by strictly increasing wavelength (nm)."""

    bands: tuple[tuple[float, GrayImage], ...] = field(default_factory=tuple)

    def __post_init__(self):
        bands = tuple((float(w), img) for w, img in self.bands)
        object.__setattr__(self, "bands", bands)
        wl = [w for w, _ in bands]
        if any(b <= a for a, b in zip(wl, wl[1:])):
            raise ValueError("band wavelengths must be strictly increasing")
        if bands:
            shape = bands[0][1].shape
            for w, img in bands:
                if img.shape != shape:
                    raise ValueError(
                        f"band at {w:g} nm has shape {img.shape}, expected {shape}"
                    )

    @property
    def wavelengths(self) -> list[float]:
        return [w for w, _ in self.bands]

    def __len__(self):
        return len(self.bands)


# --------------------------------------------------------------------------
# File I/O


def _read_pgm(raw: bytes, path) -> np.ndarray:
    # Header: magic, width, height, maxval separated by whitespace, '#' comments.
    tokens = []
    pos = 2
    n = len(raw)
    while len(tokens) < 3:
        while pos < n and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos : pos + 1] == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte before the raster
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"{path}: non-integer PGM header field") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: zero-dimension image ({width}x{height})")
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: invalid PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    body = raw[pos : pos + count * dtype.itemsize]
    if len(body) < count * dtype.itemsize:
        raise ImageFormatError(f"{path}: truncated PGM raster")
    samples = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return samples.astype(np.float64) / maxval


def _read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode == "L":
            maxval = 255
        elif im.mode in ("I;16", "I;16B", "I;16L", "I"):
            maxval = 65535
        else:
            raise ImageFormatError(f"{path}: PNG mode {im.mode!r} is not grayscale")
        arr = np.asarray(im, dtype=np.float64)
    if arr.size == 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    return arr / maxval


def load_image(path) -> GrayImage:
    """Read an 8/16-bit grayscale PGM (P5) or PNG file, scaled to [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"P5":
        arr = _read_pgm(raw, path)
    elif raw[:8] == b"\x89PNG\r\n\x1a\n":
        arr = _read_png(path)
    else:
        raise ImageFormatError(f"{path}: unsupported format (need PGM P5 or PNG)")
    return GrayImage(arr)


def quantize8(data: np.ndarray) -> np.ndarray:
    """round(v * 255) as uint8; values must already be in [0, 1]."""
    return np.floor(np.asarray(data) * 255.0 + 0.5).astype(np.uint8)


def save_image(img: GrayImage, path) -> None:
    """Write an 8-bit grayscale image; format chosen from the suffix (.pgm or .png)."""
    data = img.data
    if data.min() < 0.0 or data.max() > 1.0:
        raise ValueError(
            f"pixel values must lie in [0, 1] to save; got [{data.min()}, {data.max()}]"
        )
    path = Path(path)
    samples = quantize8(data)
    suffix = path.suffix.lower()
    if suffix == ".png":
        Image.fromarray(samples, mode="L").save(path, format="PNG")
    elif suffix in (".pgm", ".pnm", ""):
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(samples.tobytes())
    else:
        raise ImageFormatError(f"{path}: cannot write format {suffix!r}")


def load_cube(manifest) -> SpectralCube:
    """Read a ``wavelength_nm<TAB>path`` manifest; relative paths resolve
    against the manifest's directory. Lines starting with ``#`` are skipped."""
    manifest = Path(manifest)
    base = manifest.parent
    entries: dict[float, GrayImage] = {}
    with open(manifest, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1].strip():
                raise ManifestError(
                    f"{manifest}:{lineno}: expected '<wavelength_nm>\\t<path>'"
                )
            try:
                wl = float(parts[0])
            except ValueError:
                raise ManifestError(
                    f"{manifest}:{lineno}: bad wavelength {parts[0]!r}"
                ) from None
            if not np.isfinite(wl):
                raise ManifestError(f"{manifest}:{lineno}: bad wavelength {parts[0]!r}")
            if wl in entries:
                raise ManifestError(f"{manifest}:{lineno}: duplicate wavelength {wl:g}")
            img_path = Path(parts[1].strip())
            if not img_path.is_absolute():
                img_path = base / img_path
            entries[wl] = load_image(img_path)
    if not entries:
        raise ManifestError(f"{manifest}: no bands listed")
    bands = sorted(entries.items())
    shape = bands[0][1].shape
    for wl, img in bands:
        if img.shape != shape:
            raise ManifestError(
                f"{manifest}: dimension mismatch, band {wl:g} nm is "
                f"{img.width}x{img.height}, expected {shape[1]}x{shape[0]}"
            )
    return SpectralCube(tuple(bands))


# --------------------------------------------------------------------------
# Operations


def average_bands(cube: SpectralCube, center_nm: float = 850.0,
                  bandwidth_nm: float = 10.0) -> GrayImage:
    """Per-pixel mean of the bands within ``center +- bandwidth/2`` (inclusive)."""
    half = bandwidth_nm / 2.0
    selected = [img for w, img in cube.bands if abs(w - center_nm) <= half]
    if not selected:
        raise ValueError(
            f"no band within {center_nm:g} +- {half:g} nm "
            f"(cube has {', '.join(f'{w:g}' for w in cube.wavelengths) or 'no bands'})"
        )
    # running mean in ascending wavelength order; identical bands stay exact
    mean = selected[0].data.copy()
    for i, img in enumerate(selected[1:], start=2):
        mean += (img.data - mean) / i
    return GrayImage(mean)


def normalize_minmax(img: GrayImage) -> GrayImage:
    """(f - min) / (max - min); a constant image maps to zeros."""
    data = img.data
    lo, hi = data.min(), data.max()
    if hi <= lo:
        return GrayImage(np.zeros_like(data))
    out = (data - lo) / (hi - lo)
    # pin the extremes so min/max are exact despite rounding
    out[data == lo] = 0.0
    out[data == hi] = 1.0
    return GrayImage(np.clip(out, 0.0, 1.0))


def crop(img: GrayImage, roi: Roi) -> GrayImage:
    if (roi.width < 1 or roi.height < 1 or roi.x0 < 0 or roi.y0 < 0
            or roi.x0 + roi.width > img.width or roi.y0 + roi.height > img.height):
        raise ValueError(
            f"ROI {roi} out of bounds for {img.width}x{img.height} image"
        )
    return GrayImage(img.data[roi.y0 : roi.y0 + roi.height, roi.x0 : roi.x0 + roi.width])


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
