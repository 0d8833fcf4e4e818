"""End-to-end vein extraction, method comparison and cube averaging."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import enhance, retinex, segmentation
from .image import (GrayImage, Roi, average_bands, crop, ensure_dir, load_cube,
                    load_image, normalize_minmax, save_image)
from .metrics import QualityReport, build_report
from .segmentation import BinaryImage

log = logging.getLogger(__name__)

STAGES = ("normalize", "crop", "retinex", "rescale", "he", "median",
          "threshold", "prune", "invert", "thin")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    sigma: float = retinex.DEFAULT_SIGMA
    epsilon: float = retinex.DEFAULT_EPSILON
    median_window: int = enhance.DEFAULT_MEDIAN_WINDOW
    threshold: str = "otsu"
    min_area: int = segmentation.DEFAULT_MIN_AREA
    area_scale: bool = True
    connectivity: int = segmentation.DEFAULT_CONNECTIVITY
    roi: Roi | None = None
    band_center_nm: float = 850.0
    band_width_nm: float = 10.0
    invert_before_prune: bool = False
    clahe_tiles: tuple[int, int] = enhance.DEFAULT_CLAHE_TILES
    clahe_clip: float = enhance.DEFAULT_CLAHE_CLIP
    dog_sigma: float = enhance.DEFAULT_DOG_SIGMA
    dog_ratio: float = enhance.DEFAULT_DOG_RATIO
    glpf_sigma: float = enhance.DEFAULT_GLPF_SIGMA

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError(f"median window must be odd and >= 1, got {self.median_window}")
        if self.threshold != "otsu":
            if not self.threshold.startswith("fixed:"):
                raise ValueError(f"threshold must be otsu or fixed:<t>, got {self.threshold!r}")
            t = float(self.threshold[6:])
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"fixed threshold must lie in [0, 1], got {t}")
        if self.min_area < 0:
            raise ValueError(f"min_area must be >= 0, got {self.min_area}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if not self.band_width_nm >= 0:
            raise ValueError(f"band width must be >= 0, got {self.band_width_nm}")
        if min(self.clahe_tiles) < 1 or not self.clahe_clip > 0:
            raise ValueError("CLAHE needs tiles >= 1x1 and a positive clip limit")
        if not self.dog_sigma > 0 or not self.dog_ratio > 1:
            raise ValueError("DoG needs sigma > 0 and ratio > 1")
        if not self.glpf_sigma > 0:
            raise ValueError(f"glpf sigma must be positive, got {self.glpf_sigma}")

    # flat key=value text -------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name}={_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        values = dataclasses.asdict(base) if base is not None else {}
        if base is not None:
            values["roi"] = base.roi
        known = {f.name: f for f in dataclasses.fields(cls)}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not sep or key not in known:
                raise ValueError(f"config line {lineno}: unknown or malformed entry {line!r}")
            values[key] = parse_field(key, raw)
        return cls(**values)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Roi):
        return str(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def parse_field(key: str, raw: str):
    """Convert the text form of config field ``key``."""
    kind = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}[key]
    if key == "roi":
        return None if raw.lower() == "none" else Roi.parse(raw)
    if kind == "bool":
        if raw.lower() not in ("true", "false"):
            raise ValueError(f"{key}: expected true/false, got {raw!r}")
        return raw.lower() == "true"
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind.startswith("tuple"):
        parts = raw.split(",")
        if len(parts) != 2:
            raise ValueError(f"{key}: expected two comma-separated integers, got {raw!r}")
        return tuple(int(p) for p in parts)
    return raw


@dataclass
class StageTrace:
    stages: list[tuple[str, str | None]] = field(default_factory=list)
    timings_ms: list[float] = field(default_factory=list)

    def names(self) -> list[str]:
        return [name for name, _ in self.stages]

    def total_ms(self) -> float:
        return sum(self.timings_ms)


@dataclass
class ExtractResult:
    trace: StageTrace
    skeleton: BinaryImage
    vein_mask: BinaryImage
    enhanced: GrayImage
    outputs: dict[str, object]
    min_area: int


def _input_image(source, cfg: PipelineConfig, cube: bool) -> GrayImage:
    if isinstance(source, GrayImage):
        return source
    if cube:
        return average_bands(load_cube(source), cfg.band_center_nm, cfg.band_width_nm)
    return load_image(source)


def _render(name: str, value) -> GrayImage | None:
    # Binarization and pruning are shown veins-black like a raw binarization;
    # from the inversion stage on, veins are white.
    if isinstance(value, BinaryImage):
        if name in ("threshold", "prune"):
            return segmentation.invert(value).to_gray()
        return value.to_gray()
    return value


def run_extract(source, cfg: PipelineConfig | None = None, out_dir=None,
                trace: bool = False, cube: bool = False) -> ExtractResult:
    """Run the fixed stage sequence on an image path, cube manifest or GrayImage.

    With ``out_dir`` the skeleton is written as ``skeleton.pgm``; with
    ``trace`` every stage output is written too (the log-domain retinex
    stage as ``.npy``).
    """
    cfg = cfg or PipelineConfig()
    raw = _input_image(source, cfg, cube)
    out_dir = ensure_dir(out_dir) if out_dir is not None else None

    result_trace = StageTrace()
    outputs: dict[str, object] = {}

    def stage(name: str, fn: Callable[[], object]):
        t0 = time.perf_counter()
        try:
            value = fn()
        except Exception as exc:
            raise StageError(name, exc) from exc
        elapsed = (time.perf_counter() - t0) * 1000.0
        path = None
        if trace and out_dir is not None:
            idx = len(result_trace.stages)
            if name == "retinex":
                path = out_dir / f"{idx:02d}_{name}.npy"
                np.save(path, value.data)
            else:
                path = out_dir / f"{idx:02d}_{name}.pgm"
                save_image(_render(name, value), path)
            path = str(path)
        result_trace.stages.append((name, path))
        result_trace.timings_ms.append(elapsed)
        outputs[name] = value
        log.debug("stage %s: %.1f ms", name, elapsed)
        return value

    img = stage("normalize", lambda: normalize_minmax(raw))
    img = stage("crop", lambda: crop(img, cfg.roi) if cfg.roi is not None else img)
    kernel = retinex.build_kernel(cfg.sigma)
    refl = stage("retinex", lambda: retinex.single_scale_retinex(img, kernel, cfg.epsilon))
    unit = stage("rescale", lambda: retinex.rescale_to_unit(refl))
    eq = stage("he", lambda: enhance.histogram_equalize(unit))
    smooth = stage("median", lambda: enhance.median_filter(eq, cfg.median_window))
    mask = stage("threshold", lambda: segmentation.threshold(smooth, cfg.threshold))

    min_area = cfg.min_area
    if cfg.area_scale:
        min_area = segmentation.scaled_min_area(min_area, *smooth.shape)

    def prune(m):
        return segmentation.remove_small_components(m, min_area, cfg.connectivity)

    if cfg.invert_before_prune:
        # prune the complement (small non-vein holes), then flip back
        inv = stage("invert", lambda: segmentation.invert(mask))
        veins = stage("prune", lambda: segmentation.invert(prune(inv)))
    else:
        pruned = stage("prune", lambda: prune(mask))
        veins = stage("invert", lambda: pruned)
    skeleton = stage("thin", lambda: segmentation.thin(veins))

    if out_dir is not None:
        save_image(skeleton.to_gray(), out_dir / "skeleton.pgm")
    return ExtractResult(result_trace, skeleton, veins, smooth, outputs, min_area)


# --------------------------------------------------------------------------
# Method comparison


def proposed_enhancement(img: GrayImage, sigma: float = retinex.DEFAULT_SIGMA,
                         epsilon: float = retinex.DEFAULT_EPSILON) -> GrayImage:
    """Retinex, rescale, then histogram equalization."""
    refl = retinex.single_scale_retinex(img, retinex.build_kernel(sigma), epsilon)
    return enhance.histogram_equalize(retinex.rescale_to_unit(refl))


def method_table(cfg: PipelineConfig) -> dict[str, Callable[[GrayImage], GrayImage]]:
    return {
        "ssr": lambda im: proposed_enhancement(im, cfg.sigma, cfg.epsilon),
        "clahe": lambda im: enhance.clahe(im, cfg.clahe_tiles, cfg.clahe_clip),
        "dog-he": lambda im: enhance.dog_he(im, cfg.dog_sigma, cfg.dog_ratio),
        "glpf": lambda im: enhance.gaussian_lowpass(im, cfg.glpf_sigma),
    }


METHOD_NAMES = ("ssr", "clahe", "dog-he", "glpf")


class UnknownMethodError(ValueError):
    pass


def parse_methods(names) -> list[str]:
    names = [m.strip() for m in names.split(",")] if isinstance(names, str) else list(names)
    names = [n for n in names if n]
    if not names:
        raise UnknownMethodError(f"no methods given; valid names: {', '.join(METHOD_NAMES)}")
    bad = [n for n in names if n not in METHOD_NAMES]
    if bad:
        raise UnknownMethodError(
            f"unknown method(s) {', '.join(bad)}; valid names: {', '.join(METHOD_NAMES)}"
        )
    return list(dict.fromkeys(names))


def prepare_input(source, cfg: PipelineConfig, cube: bool = False) -> GrayImage:
    img = normalize_minmax(_input_image(source, cfg, cube))
    return crop(img, cfg.roi) if cfg.roi is not None else img


def run_compare(source, methods=METHOD_NAMES, cfg: PipelineConfig | None = None,
                entropy_base: float | None = None) -> QualityReport:
    """Score the original and each enhancer's output; ``ssr`` is the proposed
    method, so a report without it carries no percentages."""
    cfg = cfg or PipelineConfig()
    names = parse_methods(methods)
    img = prepare_input(source, cfg)
    table = method_table(cfg)
    kwargs = {} if entropy_base is None else {"entropy_base": entropy_base}
    proposed = "ssr" if "ssr" in names else names[0]
    report = build_report(img, [(n, table[n]) for n in names], proposed=proposed, **kwargs)
    if "ssr" not in names:
        report = dataclasses.replace(report, proposed=None)
    return report


def run_cube_average(manifest, center_nm: float = 850.0, width_nm: float = 10.0,
                     out=None) -> GrayImage:
    img = average_bands(load_cube(manifest), center_nm, width_nm)
    if out is not None:
        save_image(img, Path(out))
    return img
