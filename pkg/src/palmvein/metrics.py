"""Contrast, entropy and definition indicators and the method-comparison report.

All three indicators work on the 0-255 scale: unit-range pixels are
multiplied by 255 (no re-quantization for contrast and definition; entropy
uses the shared 256-level histogram).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .enhance import Histogram
from .image import GrayImage

INDICATORS = ("contrast", "entropy", "definition")


def contrast(img: GrayImage) -> float:
    """Population standard deviation of 255-scaled intensities."""
    # shift by one sample first: a constant image then gives exactly zero
    x = (img.data - img.data.flat[0]) * 255.0
    return float(np.sqrt(np.mean((x - x.mean()) ** 2)))


def entropy(img: GrayImage, base: float = math.e) -> float:
    """Shannon entropy of the 256-level histogram; nats unless ``base`` given."""
    p = Histogram.of(img).probabilities()
    p = p[p > 0]
    h = float(-np.sum(p * np.log(p)))
    if base != math.e:
        h /= math.log(base)
    return max(h, 0.0)


def definition(img: GrayImage) -> float:
    """Mean gradient magnitude from backward differences along rows and columns.

    Averages over the (M-1)(N-1) pixels where both differences exist.
    """
    if img.height < 2 or img.width < 2:
        raise ValueError(
            f"definition needs at least a 2x2 image, got {img.width}x{img.height}"
        )
    f = img.data * 255.0
    dx = f[1:, 1:] - f[:-1, 1:]
    dy = f[1:, 1:] - f[1:, :-1]
    return float(np.mean(np.sqrt(dx * dx + dy * dy)))


@dataclass(frozen=True)
class MethodScores:
    method: str
    contrast: float
    entropy: float
    definition: float

    @classmethod
    def measure(cls, method: str, img: GrayImage, entropy_base: float = math.e):
        return cls(method, contrast(img), entropy(img, entropy_base), definition(img))

    def get(self, indicator: str) -> float:
        return getattr(self, indicator)


def relative_improvement(proposed: float, best_other: float) -> float | None:
    """``100 * (proposed / best_other - 1)``; None where undefined."""
    if best_other == 0:
        return None
    return 100.0 * (proposed / best_other - 1.0)


@dataclass
class QualityReport:
    """Per-method indicator rows plus the proposed method's gain over the
    best competitor. The ``reference`` row (the unprocessed input) is listed
    but never counts as a competitor."""

    entries: list[MethodScores]
    proposed: str | None
    reference: str | None = "original"
    entropy_unit: str = "nats"
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        names = [e.method for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate method names in report: {names}")
        if self.proposed is not None and self.proposed not in names:
            raise ValueError(f"proposed method {self.proposed!r} not among {names}")

    def scores(self, method: str) -> MethodScores:
        for e in self.entries:
            if e.method == method:
                return e
        raise KeyError(method)

    def competitors(self) -> list[MethodScores]:
        return [e for e in self.entries if e.method not in (self.proposed, self.reference)]

    def best_competitor(self, indicator: str) -> MethodScores | None:
        others = self.competitors()
        if not others:
            return None
        return max(others, key=lambda e: e.get(indicator))

    def improvements(self) -> dict[str, float | None]:
        """Percent gain per indicator; an empty dict when there is no competitor."""
        if self.proposed is None or not self.competitors():
            return {}
        prop = self.scores(self.proposed)
        return {
            ind: relative_improvement(prop.get(ind), self.best_competitor(ind).get(ind))
            for ind in INDICATORS
        }

    def to_dict(self) -> dict:
        imp = self.improvements()
        return {
            "proposed": self.proposed,
            "reference": self.reference,
            "entropy_unit": self.entropy_unit,
            "methods": [
                {
                    "method": e.method,
                    "contrast": round(e.contrast, 4),
                    "entropy": round(e.entropy, 4),
                    "definition": round(e.definition, 4),
                }
                for e in self.entries
            ],
            "improvement_percent": {
                ind: {
                    "vs": self.best_competitor(ind).method,
                    "percent": None if v is None else round(v, 2),
                }
                for ind, v in imp.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_markdown(self) -> str:
        header = ["Method", "Contrast", "Entropy", "Definition"]
        rows = [
            [e.method, f"{e.contrast:.4f}", f"{e.entropy:.4f}", f"{e.definition:.4f}"]
            for e in self.entries
        ]
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(4)]

        def line(cells):
            padded = [cells[0].ljust(widths[0])] + [
                c.rjust(w) for c, w in zip(cells[1:], widths[1:])
            ]
            return "| " + " | ".join(padded) + " |"

        sep = "|" + "|".join(
            ["-" * (widths[0] + 2)] + ["-" * (w + 1) + ":" for w in widths[1:]]
        ) + "|"
        out = [line(header), sep] + [line(r) for r in rows]
        imp = self.improvements()
        if imp:
            out.append("")
            out.append(f"Improvement of {self.proposed} over the best other method:")
            out.append("")
            for ind, v in imp.items():
                vs = self.best_competitor(ind).method
                pct = "undefined" if v is None else f"{v:+.2f}%"
                out.append(f"- {ind}: {pct} (vs {vs})")
        if self.entropy_unit != "nats":
            out.append("")
            out.append(f"Entropy in {self.entropy_unit}.")
        return "\n".join(out) + "\n"


EnhanceFn = Callable[[GrayImage], GrayImage]


def build_report(raw: GrayImage, methods: Sequence[tuple[str, EnhanceFn]] | dict,
                 proposed: str, reference: str | None = "original",
                 entropy_base: float = math.e) -> QualityReport:
    """Run each enhancer on ``raw`` and score the outputs.

    The unprocessed input is scored as the ``reference`` row (pass None to
    omit it).
    """
    items = list(methods.items()) if isinstance(methods, dict) else list(methods)
    if not items:
        raise ValueError("build_report needs at least one method")
    if proposed not in [name for name, _ in items]:
        raise ValueError(f"no method named {proposed!r} designated as proposed")
    entries = []
    if reference is not None:
        entries.append(MethodScores.measure(reference, raw, entropy_base))
    for name, fn in items:
        entries.append(MethodScores.measure(name, fn(raw), entropy_base))
    unit = {math.e: "nats", 2: "bits", 2.0: "bits"}.get(entropy_base, f"log base {entropy_base:g}")
    return QualityReport(entries, proposed, reference, entropy_unit=unit)
