"""Intensity and structural confidence maps for ultrasound B-mode images."""

from .config import ConfidenceConfig, DenoiseConfig
from .grid import ImageGrid, ProbMask

__version__ = "0.1.0"

__all__ = ["ConfidenceConfig", "DenoiseConfig", "ImageGrid", "ProbMask", "__version__"]
