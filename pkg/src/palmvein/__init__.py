"""Palm vein extraction with single-scale Retinex shadow removal.

Submodules: ``image`` (rasters, cubes, I/O), ``retinex``, ``enhance``,
``segmentation``, ``metrics``, ``pipeline`` and ``cli``.
"""

from .image import GrayImage, Roi, SpectralCube, load_image, save_image
from .pipeline import PipelineConfig, run_compare, run_extract
from .segmentation import BinaryImage

__all__ = [
    "BinaryImage",
    "GrayImage",
    "PipelineConfig",
    "Roi",
    "SpectralCube",
    "load_image",
    "run_compare",
    "run_extract",
    "save_image",
]
__version__ = "0.1.0"
